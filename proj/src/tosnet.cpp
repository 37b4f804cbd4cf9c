#include "lvtos/tosnet.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lvtos/io.hpp"
#include "lvtos/nn/adam.hpp"
#include "lvtos/nn/loss.hpp"
#include "lvtos/rng.hpp"

namespace lvtos::tosnet {

using segmat::kSegments;

void TosNetConfig::validate() const {
    if (conv_layers < 1) throw std::invalid_argument("TosNetConfig.conv_layers must be >= 1");
    if (filters < 1) throw std::invalid_argument("TosNetConfig.filters must be >= 1");
    if (kernel < 1) throw std::invalid_argument("TosNetConfig.kernel must be >= 1");
    if (dense_width < 1) throw std::invalid_argument("TosNetConfig.dense_width must be >= 1");
    if (t_max < 2) throw std::invalid_argument("TosNetConfig.t_max must be >= 2");
    if (!(alpha > 0.0)) throw std::invalid_argument("TosNetConfig.alpha must be > 0");
    if (t0 < 0.0) throw std::invalid_argument("TosNetConfig.t0 must be >= 0");
    if (!(input_scale > 0.0)) throw std::invalid_argument("TosNetConfig.input_scale must be > 0");
}

nn::LayerGraph build_tosnet(const TosNetConfig& config) {
    config.validate();
    nn::LayerGraph g({1, kSegments, config.t_max});
    int cin = 1;
    for (int i = 0; i < config.conv_layers; ++i) {
        nn::LayerSpec conv;
        conv.kind = nn::LayerKind::conv2d;
        conv.kernel = config.kernel;
        conv.channels_in = cin;
        conv.channels_out = config.filters;
        g.add("conv" + std::to_string(i + 1), conv);
        nn::LayerSpec act;
        act.kind = nn::LayerKind::relu;
        g.add("relu" + std::to_string(i + 1), act);
        cin = config.filters;
    }
    nn::LayerSpec dense1;
    dense1.kind = nn::LayerKind::dense;
    dense1.channels_in = config.filters * static_cast<int>(kSegments * config.t_max);
    dense1.channels_out = config.dense_width;
    g.add("dense1", dense1);
    nn::LayerSpec act;
    act.kind = nn::LayerKind::relu;
    g.add("dense1.relu", act);
    nn::LayerSpec dense2;
    dense2.kind = nn::LayerKind::dense;
    dense2.channels_in = config.dense_width;
    dense2.channels_out = static_cast<int>(kSegments);
    g.add("dense2", dense2);
    // the output floor lives in the architecture, never in postprocessing
    nn::LayerSpec floor;
    floor.kind = nn::LayerKind::shifted_leaky_relu;
    floor.t0 = config.t0;
    floor.alpha = config.alpha;
    g.add("output.floor", floor);
    return g;
}

TosSample cyclic_shift_augment(const TosSample& sample, size_t k) {
    if (k >= kSegments) {
        throw std::invalid_argument("cyclic_shift_augment: shift must be in [0, 18)");
    }
    TosSample out;
    out.sm.frames = sample.sm.frames;
    out.sm.frame_interval_ms = sample.sm.frame_interval_ms;
    out.sm.values.assign(sample.sm.values.size(), 0.0);
    for (size_t s = 0; s < kSegments; ++s) {
        const size_t dst = (s + k) % kSegments;
        for (size_t t = 0; t < sample.sm.frames; ++t) {
            out.sm.at(dst, t) = sample.sm.at(s, t);
        }
        out.tos.frames[dst] = sample.tos.frames[s];
        out.tos.ms[dst] = sample.tos.ms[s];
        out.tos.no_onset[dst] = sample.tos.no_onset[s];
    }
    return out;
}

namespace {

Tensor sm_input(const segmat::StrainMatrix& sm, const TosNetConfig& config) {
    if (sm.frames != config.t_max) {
        throw std::invalid_argument("strain matrix has " + std::to_string(sm.frames) +
                                    " frames, expected t_max " + std::to_string(config.t_max) +
                                    " (pad first)");
    }
    Tensor x({1, kSegments, config.t_max}, sm.values);
    for (size_t i = 0; i < x.size(); ++i) x[i] *= config.input_scale;
    return x;
}

Tensor batch_inputs(const std::vector<const TosSample*>& batch, const TosNetConfig& config) {
    Tensor out({batch.size(), 1, kSegments, config.t_max});
    for (size_t i = 0; i < batch.size(); ++i) {
        const Tensor x = sm_input(batch[i]->sm, config);
        std::copy(x.data(), x.data() + x.size(), out.data() + i * x.size());
    }
    return out;
}

Tensor batch_targets(const std::vector<const TosSample*>& batch) {
    Tensor out({batch.size(), kSegments});
    for (size_t i = 0; i < batch.size(); ++i) {
        for (size_t s = 0; s < kSegments; ++s) out.at2(i, s) = batch[i]->tos.frames[s];
    }
    return out;
}

}  // namespace

TosTrainResult train_tosnet(nn::LayerGraph& net, const std::vector<TosSample>& train,
                            const std::vector<TosSample>& val, const TosNetConfig& config,
                            const TosnetHyper& hyper) {
    if (train.empty()) throw std::invalid_argument("train_tosnet: empty dataset");
    for (const TosSample& s : train) {
        if (s.sm.frames != config.t_max) {
            throw std::invalid_argument("train_tosnet: sample has inconsistent frame count " +
                                        std::to_string(s.sm.frames));
        }
    }
    TosTrainResult result;
    if (hyper.steps <= 0) return result;

    Rng rng(hyper.seed);
    nn::Adam adam({.lr = hyper.lr}, net.parameters());

    for (int step = 0; step < hyper.steps; ++step) {
        std::vector<const TosSample*> batch;
        batch.reserve(static_cast<size_t>(hyper.batch));
        for (int b = 0; b < hyper.batch; ++b) batch.push_back(&train[rng.below(train.size())]);
        const Tensor input = batch_inputs(batch, config);
        const Tensor target = batch_targets(batch);

        const Tensor pred = net.forward(input, true);
        Tensor grad;
        const double loss = nn::loss_mse(pred, target, &grad);

        net.zero_grad();
        net.backward(grad);
        adam.step();

        if (step == 0) result.initial_loss = loss;
        result.final_loss = loss;

        TosLogRow row;
        row.step = step;
        row.loss = loss;
        const bool last = step == hyper.steps - 1;
        if (!val.empty() && (last || (hyper.val_every > 0 && step % hyper.val_every == 0))) {
            row.val_rmse_frames = val_rmse_frames(net, val, config);
            result.final_val_rmse_frames = row.val_rmse_frames;
        }
        result.log.push_back(row);
    }
    return result;
}

segmat::TosCurve predict_tos(nn::LayerGraph& net, const segmat::StrainMatrix& sm,
                             const TosNetConfig& config) {
    const Tensor input({1, 1, kSegments, config.t_max}, sm_input(sm, config).values());
    const Tensor out = net.forward(input, false);
    if (out.size() != kSegments) {
        throw std::logic_error("predict_tos: network produced " + std::to_string(out.size()) +
                               " outputs, expected 18");
    }
    std::array<double, kSegments> frames{};
    for (size_t s = 0; s < kSegments; ++s) frames[s] = out[s];
    return segmat::make_tos_curve(frames, sm.frame_interval_ms);
}

double rmse_frames(const segmat::TosCurve& a, const segmat::TosCurve& b) {
    double sum = 0.0;
    for (size_t s = 0; s < kSegments; ++s) {
        const double d = a.frames[s] - b.frames[s];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(kSegments));
}

double val_rmse_frames(nn::LayerGraph& net, const std::vector<TosSample>& val,
                       const TosNetConfig& config) {
    if (val.empty()) return -1.0;
    double sum = 0.0;
    for (const TosSample& s : val) {
        const segmat::TosCurve pred = predict_tos(net, s.sm, config);
        for (size_t seg = 0; seg < kSegments; ++seg) {
            const double d = pred.frames[seg] - s.tos.frames[seg];
            sum += d * d;
        }
    }
    return std::sqrt(sum / static_cast<double>(val.size() * kSegments));
}

CompareReport compare_methods(nn::LayerGraph& net, const TosNetConfig& config,
                              const std::vector<CompareCase>& cases, double baseline_threshold) {
    using clock = std::chrono::steady_clock;
    CompareReport report;
    double sq_cnn = 0.0, sq_base = 0.0;
    for (const CompareCase& c : cases) {
        const auto t0 = clock::now();
        const segmat::TosCurve cnn = predict_tos(net, c.sm, config);
        const auto t1 = clock::now();
        const segmat::TosCurve base = segmat::baseline_tos(c.sm, baseline_threshold);
        const auto t2 = clock::now();

        CompareRow cnn_row;
        cnn_row.id = c.id;
        cnn_row.method = "tosnet";
        cnn_row.rmse_frames = rmse_frames(cnn, c.ground_truth);
        cnn_row.rmse_ms = cnn_row.rmse_frames * c.sm.frame_interval_ms;
        cnn_row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        cnn_row.predicted = cnn;
        report.rows.push_back(cnn_row);

        CompareRow base_row;
        base_row.id = c.id;
        base_row.method = "baseline";
        base_row.rmse_frames = rmse_frames(base, c.ground_truth);
        base_row.rmse_ms = base_row.rmse_frames * c.sm.frame_interval_ms;
        base_row.wall_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
        base_row.predicted = base;
        report.rows.push_back(base_row);

        for (size_t s = 0; s < kSegments; ++s) {
            const double dc = cnn.frames[s] - c.ground_truth.frames[s];
            const double db = base.frames[s] - c.ground_truth.frames[s];
            sq_cnn += dc * dc;
            sq_base += db * db;
        }
    }
    if (!cases.empty()) {
        const double n = static_cast<double>(cases.size() * kSegments);
        report.aggregate_rmse_frames_tosnet = std::sqrt(sq_cnn / n);
        report.aggregate_rmse_frames_baseline = std::sqrt(sq_base / n);
        report.aggregate_rmse_ms_tosnet =
            report.aggregate_rmse_frames_tosnet * cases[0].sm.frame_interval_ms;
        report.aggregate_rmse_ms_baseline =
            report.aggregate_rmse_frames_baseline * cases[0].sm.frame_interval_ms;
    }
    return report;
}

void write_compare_csv(const std::string& path, const CompareReport& report) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "case,method,rmse_frames,rmse_ms,wall_ms\n";
    for (const CompareRow& row : report.rows) {
        f << row.id << "," << row.method << "," << fmt_double(row.rmse_frames) << ","
          << fmt_double(row.rmse_ms) << "," << fmt_double(row.wall_ms) << "\n";
    }
    f << "aggregate,tosnet," << fmt_double(report.aggregate_rmse_frames_tosnet) << ","
      << fmt_double(report.aggregate_rmse_ms_tosnet) << ",\n";
    f << "aggregate,baseline," << fmt_double(report.aggregate_rmse_frames_baseline) << ","
      << fmt_double(report.aggregate_rmse_ms_baseline) << ",\n";
    if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

void append_polyline(std::ostream& os, const segmat::TosCurve& tos, double y_min, double y_max,
                     const char* color) {
    const double plot_x0 = 60.0, plot_x1 = 560.0, plot_y0 = 40.0, plot_y1 = 340.0;
    os << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (size_t s = 0; s < kSegments; ++s) {
        const double fx =
            plot_x0 + (plot_x1 - plot_x0) * static_cast<double>(s) / (kSegments - 1);
        const double span = y_max - y_min > 1e-12 ? y_max - y_min : 1.0;
        const double fy = plot_y1 - (plot_y1 - plot_y0) * (tos.ms[s] - y_min) / span;
        if (s) os << " ";
        os << fmt_fixed(fx, 2) << "," << fmt_fixed(fy, 2);
    }
    os << "\"/>\n";
}

}  // namespace

std::string render_tos_curves_svg(const segmat::TosCurve& truth, const segmat::TosCurve& baseline,
                                  const segmat::TosCurve& estimated, const std::string& title) {
    double y_min = truth.ms[0], y_max = truth.ms[0];
    for (const segmat::TosCurve* c : {&truth, &baseline, &estimated}) {
        for (size_t s = 0; s < kSegments; ++s) {
            y_min = std::min(y_min, c->ms[s]);
            y_max = std::max(y_max, c->ms[s]);
        }
    }
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"620\" height=\"400\" "
          "viewBox=\"0 0 620 400\">\n";
    os << "  <rect width=\"620\" height=\"400\" fill=\"white\"/>\n";
    os << "  <text x=\"310\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"14\">" << title << "</text>\n";
    os << "  <line x1=\"60\" y1=\"340\" x2=\"560\" y2=\"340\" stroke=\"black\"/>\n";
    os << "  <line x1=\"60\" y1=\"40\" x2=\"60\" y2=\"340\" stroke=\"black\"/>\n";
    os << "  <text x=\"310\" y=\"370\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"12\">segment</text>\n";
    os << "  <text x=\"20\" y=\"190\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"12\" transform=\"rotate(-90 20 190)\">TOS (ms)</text>\n";
    os << "  <text x=\"64\" y=\"356\" font-family=\"sans-serif\" font-size=\"10\">0</text>\n";
    os << "  <text x=\"548\" y=\"356\" font-family=\"sans-serif\" font-size=\"10\">17</text>\n";
    os << "  <text x=\"56\" y=\"344\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"10\">" << fmt_fixed(y_min, 1) << "</text>\n";
    os << "  <text x=\"56\" y=\"44\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"10\">" << fmt_fixed(y_max, 1) << "</text>\n";
    append_polyline(os, truth, y_min, y_max, "black");
    append_polyline(os, baseline, y_min, y_max, "blue");
    append_polyline(os, estimated, y_min, y_max, "orange");
    os << "  <text x=\"480\" y=\"56\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"black\">ground truth</text>\n";
    os << "  <text x=\"480\" y=\"72\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"blue\">baseline</text>\n";
    os << "  <text x=\"480\" y=\"88\" font-family=\"sans-serif\" font-size=\"11\" "
          "fill=\"orange\">estimate</text>\n";
    os << "</svg>\n";
    return os.str();
}

void write_tos_log_csv(const std::string& path, const std::vector<TosLogRow>& log) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "step,loss,val_rmse_frames\n";
    for (const TosLogRow& row : log) {
        f << row.step << "," << fmt_double(row.loss) << ",";
        if (row.val_rmse_frames >= 0.0) f << fmt_double(row.val_rmse_frames);
        f << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lvtos::tosnet

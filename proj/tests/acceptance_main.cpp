// End-to-end acceptance suite. Each criterion prints one [PASS]/[FAIL] line;
// the process exits nonzero if any criterion fails. Quantitative thresholds
// are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "lvtos/aha.hpp"
#include "lvtos/metrics.hpp"
#include "lvtos/nn/loss.hpp"
#include "lvtos/phantom.hpp"
#include "lvtos/pipeline.hpp"
#include "lvtos/segnet.hpp"
#include "lvtos/strain.hpp"
#include "lvtos/tosnet.hpp"

using namespace lvtos;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return "<missing:" + path + ">";
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// ---- criterion 1: gradient suite ------------------------------------------

nn::LayerSpec grad_spec(nn::LayerKind kind) {
    nn::LayerSpec s;
    s.kind = kind;
    switch (kind) {
        case nn::LayerKind::conv2d:
            s.kernel = 3;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case nn::LayerKind::dilated_conv2d:
            s.kernel = 3;
            s.dilation = 2;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case nn::LayerKind::transposed_conv2d:
            s.kernel = 3;
            s.stride = 2;
            s.channels_in = 2;
            s.channels_out = 2;
            break;
        case nn::LayerKind::maxpool2d:
            s.kernel = 3;
            s.stride = 2;
            break;
        case nn::LayerKind::batchnorm:
            s.channels_in = 2;
            break;
        case nn::LayerKind::dense:
            s.channels_in = 12;
            s.channels_out = 5;
            break;
        case nn::LayerKind::shifted_leaky_relu:
            s.t0 = 0.4;
            s.alpha = 0.01;
            break;
        default:
            break;
    }
    return s;
}

void criterion_1() {
    const auto start = clock_type::now();
    const nn::LayerKind kinds[] = {
        nn::LayerKind::conv2d,     nn::LayerKind::dilated_conv2d,
        nn::LayerKind::transposed_conv2d, nn::LayerKind::maxpool2d,
        nn::LayerKind::batchnorm,  nn::LayerKind::dense,
        nn::LayerKind::relu,       nn::LayerKind::leaky_relu,
        nn::LayerKind::shifted_leaky_relu, nn::LayerKind::softmax,
    };
    double worst = 0.0;
    std::string worst_at = "none";
    size_t checked = 0;
    for (nn::LayerKind kind : kinds) {
        for (uint64_t seed = 1; seed <= 20; ++seed) {
            Rng rng(seed * 101 + static_cast<uint64_t>(kind));
            auto layer = nn::make_layer(grad_spec(kind), nn::layer_kind_name(kind));
            layer->init_params(rng);
            Tensor x = kind == nn::LayerKind::dense
                           ? gradcheck::kink_safe_tensor({3, 12}, rng)
                           : gradcheck::kink_safe_tensor({2, 2, 5, 5}, rng);
            const auto result = gradcheck::check_layer(*layer, x, rng);
            checked += result.checked;
            if (result.max_rel_err > worst) {
                worst = result.max_rel_err;
                worst_at = std::string(nn::layer_kind_name(kind)) + "/" + result.worst;
            }
        }
    }
    // losses: MSE directly, seg loss through softmax so the domain stays valid
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 977);
        Tensor pred = gradcheck::kink_safe_tensor({3, 6}, rng);
        Tensor target = gradcheck::kink_safe_tensor({3, 6}, rng);
        Tensor grad;
        nn::loss_mse(pred, target, &grad);
        gradcheck::Result r;
        gradcheck::check_buffer(
            pred.data(), pred.size(), [&] { return nn::loss_mse(pred, target); }, grad.data(),
            "mse.pred", r);
        checked += r.checked;

        nn::LayerSpec sm_spec;
        sm_spec.kind = nn::LayerKind::softmax;
        auto softmax = nn::make_layer(sm_spec, "softmax");
        Tensor logits = gradcheck::kink_safe_tensor({2, 3, 2, 2}, rng);
        Tensor onehot({2, 3, 2, 2});
        for (size_t n = 0; n < 2; ++n) {
            for (size_t p = 0; p < 4; ++p) onehot.data()[(n * 3 + rng.below(3)) * 4 + p] = 1.0;
        }
        const std::vector<double> weights = {1.0, 2.0, 0.5};
        const Tensor prob = softmax->forward(logits, true);
        Tensor dprob;
        nn::loss_weighted_ce_soft_dice(prob, onehot, weights, &dprob);
        const Tensor dlogits = softmax->backward(dprob);
        gradcheck::Result r2;
        gradcheck::check_buffer(
            logits.data(), logits.size(),
            [&] {
                const Tensor p = softmax->forward(logits, true);
                return nn::loss_weighted_ce_soft_dice(p, onehot, weights).total;
            },
            dlogits.data(), "seg_loss.logits", r2);
        checked += r2.checked;
        if (r.max_rel_err > worst) worst = r.max_rel_err, worst_at = "mse/" + r.worst;
        if (r2.max_rel_err > worst) worst = r2.max_rel_err, worst_at = "seg_loss/" + r2.worst;
    }
    const double elapsed = seconds_since(start);
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "max rel err %.3g at %s over %zu derivatives, 20 seeds/kind, %.1fs", worst,
                  worst_at.c_str(), checked, elapsed);
    report(1, "gradient suite matches central finite differences (<1e-4)",
           worst < 1e-4 && elapsed < 60.0, detail);
}

// ---- criterion 2: strain correctness ---------------------------------------

void criterion_2() {
    const size_t n = 128;
    const double angle = 0.05;
    const double ca = std::cos(angle), sa = std::sin(angle);

    // analytic Jacobian path: D = R - I at every pixel
    strain::JacobianField d;
    d.height = d.width = n;
    d.d.assign(n * n * 4, 0.0);
    for (size_t i = 0; i < n * n; ++i) {
        d.d[i * 4 + 0] = ca - 1.0;
        d.d[i * 4 + 1] = -sa;
        d.d[i * 4 + 2] = sa;
        d.d[i * 4 + 3] = ca - 1.0;
    }
    const strain::StrainField e_analytic = strain::strain_tensor(d);
    double analytic_max = 0.0;
    for (double v : e_analytic.e) analytic_max = std::max(analytic_max, std::abs(v));

    // finite-difference path on the sampled rotation field; the displacement
    // is not torus-periodic, so the wrap seam (one-pixel border) is excluded
    strain::DisplacementField f;
    f.frames = 1;
    f.height = f.width = n;
    f.u.assign(n * n * 2, 0.0);
    const double c = 0.5 * static_cast<double>(n - 1);
    for (size_t r = 0; r < n; ++r) {
        for (size_t col = 0; col < n; ++col) {
            const double dx = static_cast<double>(col) - c;
            const double dy = static_cast<double>(r) - c;
            f.u[(r * n + col) * 2] = (ca * dx - sa * dy) - dx;
            f.u[(r * n + col) * 2 + 1] = (sa * dx + ca * dy) - dy;
        }
    }
    const strain::StrainField e_fd = strain::strain_tensor(strain::jacobian(f, 0));
    double fd_max = 0.0;
    for (size_t r = 1; r + 1 < n; ++r) {
        for (size_t col = 1; col + 1 < n; ++col) {
            for (size_t k = 0; k < 3; ++k) {
                fd_max = std::max(fd_max, std::abs(e_fd.e[(r * n + col) * 3 + k]));
            }
        }
    }

    // uniform contraction through the full grid pipeline
    for (size_t r = 0; r < n; ++r) {
        for (size_t col = 0; col < n; ++col) {
            const double dx = static_cast<double>(col) - c;
            const double dy = static_cast<double>(r) - c;
            f.u[(r * n + col) * 2] = -0.1 * dx;
            f.u[(r * n + col) * 2 + 1] = -0.1 * dy;
        }
    }
    const strain::EccField ecc =
        strain::circumferential_component(strain::strain_tensor(strain::jacobian(f, 0)), c, c);
    double ecc_err = 0.0;
    for (size_t r = 0; r < n; ++r) {
        for (size_t col = 0; col < n; ++col) {
            const double radius = std::hypot(static_cast<double>(col) - c,
                                             static_cast<double>(r) - c);
            if (radius < 20.0 || radius > 34.0) continue;  // annulus mask interior
            ecc_err = std::max(ecc_err, std::abs(ecc.at(r, col) - (-0.095)));
        }
    }

    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "rotation |E| analytic %.2e (<1e-9), grid %.2e (<1e-3); contraction Ecc err "
                  "%.2e (<1e-3)",
                  analytic_max, fd_max, ecc_err);
    report(2, "strain correctness on rotation and uniform contraction",
           analytic_max < 1e-9 && fd_max < 1e-3 && ecc_err < 1e-3, detail);
}

// ---- criterion 3: oracle equivalence ----------------------------------------

void criterion_3() {
    phantom::DatasetSpec ds;
    ds.base.height = ds.base.width = 96;
    ds.base.frames = 24;
    ds.base.endo_radius = 15.0;
    ds.base.epi_radius = 25.0;
    ds.base.noise_sigma = 0.0;  // noise-free
    ds.base.rv_insertion_angle = 0.6;
    ds.n_cases = 25;
    ds.seed = 321;
    double worst = 0.0;
    for (size_t i = 0; i < ds.n_cases; ++i) {
        const phantom::PhantomCase c = phantom::generate(phantom::case_spec(ds, i));
        const segmat::StrainMatrix sm = pipeline::strain_matrix_for_case(c);
        const segmat::TosCurve tos = segmat::baseline_tos(sm, -0.01);
        for (size_t s = 0; s < segmat::kSegments; ++s) {
            worst = std::max(worst, std::abs(tos.frames[s] - c.ground_truth.frames[s]));
        }
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "25 phantoms, worst |error| %.3f frames (<=1)", worst);
    report(3, "threshold baseline recovers generator onsets within 1 frame", worst <= 1.0,
           detail);
}

// ---- criteria 4 + 5: learning check and the output floor --------------------

void criteria_4_and_5() {
    const auto start = clock_type::now();
    phantom::DatasetSpec ds;
    ds.base.height = ds.base.width = 96;
    ds.base.frames = 24;
    ds.base.endo_radius = 15.0;
    ds.base.epi_radius = 25.0;
    ds.base.noise_sigma = 0.0;
    ds.n_cases = 125;
    ds.train_fraction = 0.8;
    ds.seed = 202;

    tosnet::TosNetConfig config;  // defaults: 3 conv x16, dense 256, t_max 32
    std::vector<tosnet::TosSample> train, val;
    for (size_t i = 0; i < ds.n_cases; ++i) {
        const phantom::PhantomCase c = phantom::generate(phantom::case_spec(ds, i));
        tosnet::TosSample s;
        s.sm = segmat::pad_time(pipeline::strain_matrix_for_case(c), config.t_max);
        s.tos = c.ground_truth;
        if (i < 100) {
            train.push_back(s);
            for (int k = 1; k <= 17; ++k) {
                train.push_back(tosnet::cyclic_shift_augment(s, static_cast<size_t>(k)));
            }
        } else {
            val.push_back(s);
        }
    }

    nn::LayerGraph net = tosnet::build_tosnet(config);
    Rng init_rng(5);
    net.init_params(init_rng);
    tosnet::TosnetHyper hyper;
    hyper.lr = 1e-3;
    hyper.batch = 32;
    hyper.steps = 2000;
    hyper.seed = 8;
    hyper.val_every = 0;
    const tosnet::TosTrainResult result = tosnet::train_tosnet(net, train, val, config, hyper);
    const double rmse = tosnet::val_rmse_frames(net, val, config);
    const double rmse_ms = rmse * ds.base.frame_interval_ms;
    const double elapsed = seconds_since(start);
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "100 train phantoms x18 shifts, 25 held out: RMSE %.3f frames / %.1f ms "
                  "(<=1.5 / <=25.5), loss %.1f->%.2f, %.0fs (<600)",
                  rmse, rmse_ms, result.initial_loss, result.final_loss, elapsed);
    report(4, "activation-time network learns the phantom task",
           rmse <= 1.5 && rmse_ms <= 25.5 && elapsed < 600.0, detail);

    // soft property, reported but not asserted: the architecture is not
    // exactly shift-equivariant, so only log how close it gets
    double eq_sq = 0.0;
    size_t eq_n = 0;
    for (size_t i = 0; i < val.size(); ++i) {
        const segmat::TosCurve base = tosnet::predict_tos(net, val[i].sm, config);
        for (size_t k : {3UL, 9UL}) {
            const tosnet::TosSample shifted = tosnet::cyclic_shift_augment(val[i], k);
            const segmat::TosCurve moved = tosnet::predict_tos(net, shifted.sm, config);
            for (size_t s = 0; s < segmat::kSegments; ++s) {
                const double d = moved.frames[(s + k) % segmat::kSegments] - base.frames[s];
                eq_sq += d * d;
                ++eq_n;
            }
        }
    }
    std::printf("[INFO] criterion 4 note: cyclic-shift equivariance RMSE %.3f frames "
                "(reported, not asserted)\n",
                std::sqrt(eq_sq / static_cast<double>(eq_n)));

    // criterion 5 on both the trained checkpoint and a fresh random one
    size_t violations = 0;
    size_t checked = 0;
    Rng fuzz(99);
    auto fuzz_net = [&](nn::LayerGraph& g, const tosnet::TosNetConfig& cfg, int rounds) {
        for (int i = 0; i < rounds; ++i) {
            segmat::StrainMatrix sm;
            sm.frames = cfg.t_max;
            sm.frame_interval_ms = 17.0;
            sm.values.assign(segmat::kSegments * cfg.t_max, 0.0);
            for (double& v : sm.values) v = fuzz.gauss() * 2.0;
            const segmat::TosCurve tos = tosnet::predict_tos(g, sm, cfg);
            for (size_t s = 0; s < segmat::kSegments; ++s) {
                ++checked;
                if (!(tos.frames[s] >= cfg.t0)) ++violations;
            }
        }
    };
    fuzz_net(net, config, 500);
    tosnet::TosNetConfig shifted = config;
    shifted.t0 = 2.0;
    nn::LayerGraph random_net = tosnet::build_tosnet(shifted);
    Rng rng2(404);
    random_net.init_params(rng2);
    for (auto& [name, p] : random_net.parameters()) {
        for (size_t i = 0; i < p->size(); ++i) (*p)[i] *= 4.0;  // push raw outputs below t0
    }
    fuzz_net(random_net, shifted, 500);
    char detail5[160];
    std::snprintf(detail5, sizeof(detail5),
                  "1000 fuzzed inputs, %zu outputs checked, %zu below t0", checked, violations);
    report(5, "shifted-leaky-relu floor: every output >= t0, exact", violations == 0, detail5);
}

// ---- criterion 6: segmentation check ----------------------------------------

void criterion_6() {
    const auto start = clock_type::now();
    phantom::DatasetSpec ds;
    ds.base.height = ds.base.width = 64;
    ds.base.frames = 24;
    ds.base.endo_radius = 10.0;
    ds.base.epi_radius = 17.0;
    ds.base.noise_sigma = 0.02;
    ds.n_cases = 16;
    ds.train_fraction = 0.75;
    ds.seed = 42;

    std::vector<segnet::SegSample> train, val;
    for (size_t i = 0; i < ds.n_cases; ++i) {
        const phantom::PhantomCase c = phantom::generate(phantom::case_spec(ds, i));
        for (size_t k = 0; k < 4; ++k) {
            const size_t t = k * (c.spec.frames - 1) / 3;
            segnet::SegSample s;
            s.image = Tensor({1, 64, 64},
                             std::vector<double>(c.images.begin() + static_cast<long>(t * 4096),
                                                 c.images.begin() +
                                                     static_cast<long>((t + 1) * 4096)));
            s.label = c.frame_masks[t];
            (i < 12 ? train : val).push_back(std::move(s));
        }
    }

    segnet::UNetConfig config;  // 64x64, width 8
    nn::LayerGraph net = segnet::build_unet(config);
    Rng rng(7);
    net.init_params(rng);
    segnet::SegnetHyper hyper;
    hyper.lr = 1e-3;
    hyper.batch = 8;
    hyper.steps = 300;  // well under the 1000-step budget
    hyper.seed = 3;
    hyper.val_every = 0;
    segnet::train_segnet(net, train, val, hyper);

    double plain = 0.0, tta = 0.0;
    for (const segnet::SegSample& s : val) {
        plain += metrics::dice(segnet::mask_from_prob(segnet::predict(net, s.image)), s.label);
        tta += metrics::dice(segnet::mask_from_prob(segnet::predict_tta(net, s.image)), s.label);
    }
    plain /= static_cast<double>(val.size());
    tta /= static_cast<double>(val.size());
    const double elapsed = seconds_since(start);
    char detail[256];
    std::snprintf(detail, sizeof(detail),
                  "64x64 phantoms, 300 steps: held-out dice %.4f (>=0.9), TTA %.4f (>= plain - "
                  "0.02), %.0fs",
                  plain, tta, elapsed);
    report(6, "segmentation network reaches dice 0.9 with rotation averaging intact",
           plain >= 0.9 && tta >= plain - 0.02, detail);
}

// ---- criterion 7: metric oracles --------------------------------------------

double oracle_min_sq(const std::pair<int, int>& p, const std::vector<std::pair<int, int>>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) {
        const double dy = p.first - q.first, dx = p.second - q.second;
        best = std::min(best, dy * dy + dx * dx);
    }
    return best;
}

std::vector<std::pair<int, int>> oracle_boundary(const Mask& m) {
    std::vector<std::pair<int, int>> pts;
    for (int r = 0; r < static_cast<int>(m.height); ++r) {
        for (int c = 0; c < static_cast<int>(m.width); ++c) {
            if (!m.at(static_cast<size_t>(r), static_cast<size_t>(c))) continue;
            bool edge = r == 0 || c == 0 || r + 1 == static_cast<int>(m.height) ||
                        c + 1 == static_cast<int>(m.width);
            if (!edge) {
                edge = !m.at(r - 1, c) || !m.at(r + 1, c) || !m.at(r, c - 1) || !m.at(r, c + 1);
            }
            if (edge) pts.emplace_back(r, c);
        }
    }
    return pts;
}

void criterion_7() {
    Rng rng(2024);
    size_t mismatches = 0;
    for (int trial = 0; trial < 50; ++trial) {
        Mask a(8, 8), b(8, 8);
        for (auto& v : a.data) v = rng.uniform() < 0.35 ? 1 : 0;
        for (auto& v : b.data) v = rng.uniform() < 0.35 ? 1 : 0;
        if (a.count() == 0) a.set(rng.below(8), rng.below(8), true);
        if (b.count() == 0) b.set(rng.below(8), rng.below(8), true);

        double na = 0, nb = 0, inter = 0;
        for (size_t i = 0; i < 64; ++i) {
            na += a.data[i] ? 1 : 0;
            nb += b.data[i] ? 1 : 0;
            inter += (a.data[i] && b.data[i]) ? 1 : 0;
        }
        const double want_dice = na + nb == 0 ? 1.0 : 2.0 * inter / (na + nb);

        const auto pa = oracle_boundary(a), pb = oracle_boundary(b);
        double want_hd = 0.0, sum_ab = 0.0, sum_ba = 0.0;
        for (const auto& p : pa) {
            const double d = oracle_min_sq(p, pb);
            want_hd = std::max(want_hd, d);
            sum_ab += std::sqrt(d);
        }
        for (const auto& p : pb) {
            const double d = oracle_min_sq(p, pa);
            want_hd = std::max(want_hd, d);
            sum_ba += std::sqrt(d);
        }
        want_hd = std::sqrt(want_hd);
        const double want_msd = (sum_ab + sum_ba) / static_cast<double>(pa.size() + pb.size());

        if (metrics::dice(a, b) != want_dice) ++mismatches;
        if (metrics::hausdorff(a, b) != want_hd) ++mismatches;
        if (metrics::mean_surface_distance(a, b) != want_msd) ++mismatches;
    }
    char detail[128];
    std::snprintf(detail, sizeof(detail), "50 random 8x8 pairs, %zu mismatches", mismatches);
    report(7, "dice/Hausdorff/MSD equal brute force exactly", mismatches == 0, detail);
}

// ---- criterion 8: aggregation bounds ----------------------------------------

void criterion_8() {
    Rng rng(777);
    bool ok = true;
    std::string why = "bounds hold on 100 stacks; constant maps exact";
    for (int trial = 0; trial < 100 && ok; ++trial) {
        aha::SliceStack stack;
        stack.rv_insertion_angle = rng.uniform(0.0, 6.28);
        double lo = 1e30, hi = -1e30;
        const aha::SliceLevel levels[4] = {aha::SliceLevel::basal, aha::SliceLevel::mid,
                                           aha::SliceLevel::mid, aha::SliceLevel::apical};
        for (int i = 0; i < 4; ++i) {
            aha::SliceTos s;
            s.level = levels[i];
            s.z_mm = 8.0 * i;
            s.centroid_x = rng.uniform(20.0, 40.0);
            s.centroid_y = rng.uniform(20.0, 40.0);
            s.mean_radius = rng.uniform(8.0, 16.0);
            for (size_t k = 0; k < segmat::kSegments; ++k) {
                s.tos.ms[k] = rng.uniform(0.0, 400.0);
                s.tos.frames[k] = s.tos.ms[k] / 17.0;
                lo = std::min(lo, s.tos.ms[k]);
                hi = std::max(hi, s.tos.ms[k]);
            }
            stack.slices.push_back(s);
        }
        const aha::AhaMap map = aha::to_aha(stack);
        for (double v : map.tos_ms) {
            if (v < lo - 1e-9 || v > hi + 1e-9) {
                ok = false;
                why = "to_aha left the input range";
            }
        }
        const aha::SurfaceMesh mesh = aha::reconstruct_surface(stack, 3, 36);
        for (const aha::MeshVertex& v : mesh.vertices) {
            if (v.scalar < lo - 1e-9 || v.scalar > hi + 1e-9) {
                ok = false;
                why = "reconstruct_surface left the input range";
            }
        }
    }
    // constant input -> constant output, exact
    aha::SliceStack flat;
    flat.rv_insertion_angle = 0.2;
    const aha::SliceLevel levels[4] = {aha::SliceLevel::basal, aha::SliceLevel::mid,
                                       aha::SliceLevel::mid, aha::SliceLevel::apical};
    for (int i = 0; i < 4; ++i) {
        aha::SliceTos s;
        s.level = levels[i];
        s.z_mm = 8.0 * i;
        s.centroid_x = 32.0;
        s.centroid_y = 32.0;
        s.mean_radius = 12.0;
        for (size_t k = 0; k < segmat::kSegments; ++k) {
            s.tos.ms[k] = 123.0;
            s.tos.frames[k] = 123.0 / 17.0;
        }
        flat.slices.push_back(s);
    }
    const aha::AhaMap flat_map = aha::to_aha(flat);
    for (double v : flat_map.tos_ms) {
        if (v != 123.0) {
            ok = false;
            why = "constant stack did not map to the exact constant";
        }
    }
    const aha::SurfaceMesh flat_mesh = aha::reconstruct_surface(flat, 2, 24);
    for (const aha::MeshVertex& v : flat_mesh.vertices) {
        if (v.scalar != 123.0) {
            ok = false;
            why = "constant stack mesh scalar drifted";
        }
    }
    report(8, "17-sector and surface aggregation are bound-preserving", ok, why);
}

// ---- criterion 9: determinism ------------------------------------------------

pipeline::PipelineConfig determinism_config(const std::string& root) {
    pipeline::PipelineConfig c;
    c.seed = 5;
    c.paths.data_dir = root + "/data";
    c.paths.checkpoint_dir = root + "/ckpt";
    c.paths.output_dir = root + "/out";
    c.dataset.n_cases = 8;
    c.dataset.train_fraction = 0.5;
    c.dataset.base.height = 48;
    c.dataset.base.width = 48;
    c.dataset.base.frames = 12;
    c.dataset.base.endo_radius = 8.0;
    c.dataset.base.epi_radius = 14.0;
    c.dataset.base.noise_sigma = 0.01;
    c.unet.input_size = 48;
    c.unet.base_width = 4;
    c.seg_hyper.steps = 10;
    c.seg_hyper.batch = 2;
    c.seg_frames_per_case = 2;
    c.tos_config.t_max = 16;
    c.tos_config.conv_layers = 2;
    c.tos_config.filters = 8;
    c.tos_config.dense_width = 32;
    c.tos_hyper.steps = 40;
    c.tos_hyper.batch = 8;
    c.tos_shifts = 3;
    c.viz.rings_per_gap = 2;
    c.viz.angular_resolution = 24;
    c.assertions = {.min_val_dice = 0.0,
                    .max_tta_dice_drop = 1.0,
                    .max_tos_rmse_frames = 1e9,
                    .max_baseline_rmse_frames = 1e9,
                    .max_seg_loss_ratio = 1e9,
                    .max_tos_loss_ratio = 1e9};
    return pipeline::PipelineConfig::from_json(c.to_json());
}

void criterion_9() {
    const std::string root_a = (fs::temp_directory_path() / "lvtos_acc_a").string();
    const std::string root_b = (fs::temp_directory_path() / "lvtos_acc_b").string();
    fs::remove_all(root_a);
    fs::remove_all(root_b);
    const auto ra = pipeline::run_all(determinism_config(root_a));
    const auto rb = pipeline::run_all(determinism_config(root_b));

    size_t mismatches = 0;
    size_t compared = 0;
    auto compare = [&](const std::string& rel) {
        ++compared;
        if (read_file(root_a + rel) != read_file(root_b + rel)) ++mismatches;
    };
    compare("/out/summary.json");
    compare("/out/bullseye.svg");
    compare("/out/surface.txt");
    compare("/out/stack.json");
    compare("/out/aha_sectors.csv");
    for (const auto& entry : fs::directory_iterator(root_a + "/out/curves")) {
        compare("/out/curves/" + entry.path().filename().string());
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "two single-threaded full runs: %zu artifacts compared, %zu differ (exit %d/%d)",
                  compared, mismatches, ra.exit_code, rb.exit_code);
    report(9, "repeated runs are byte-identical",
           mismatches == 0 && ra.exit_code == 0 && rb.exit_code == 0, detail);
    fs::remove_all(root_a);
    fs::remove_all(root_b);
}

}  // namespace

int main() {
    const auto start = clock_type::now();
    nn::set_threads(1);
    criterion_1();
    criterion_2();
    criterion_3();
    criteria_4_and_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    std::printf("acceptance: %d failure(s), %.0f s total\n", g_failures, seconds_since(start));
    return g_failures == 0 ? 0 : 1;
}

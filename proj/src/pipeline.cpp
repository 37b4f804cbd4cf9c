#include "lvtos/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lvtos/io.hpp"
#include "lvtos/nn/layers.hpp"

namespace lvtos::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kDegToRad = 0.017453292519943295;

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object()) {
        throw std::runtime_error("config: " + context + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const std::string& a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw std::runtime_error("config: unknown key '" + context + key + "'");
        }
    }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

std::string join(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void PipelineConfig::validate() const {
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    dataset.base.validate();
    if (dataset.n_cases < 1) throw std::invalid_argument("config: phantom.n_cases must be >= 1");
    unet.validate();
    tos_config.validate();
    if (!(baseline_threshold < 0.0)) {
        throw std::invalid_argument("config: baseline.threshold must be negative");
    }
    if (tos_shifts < 0 || tos_shifts >= static_cast<int>(segmat::kSegments)) {
        throw std::invalid_argument("config: tosnet.shifts must be in [0, 18)");
    }
    if (seg_frames_per_case < 1) {
        throw std::invalid_argument("config: segnet.frames_per_case must be >= 1");
    }
    if (dataset.base.frames > tos_config.t_max) {
        throw std::invalid_argument("config: tosnet.t_max must be >= phantom.frames");
    }
    if (static_cast<size_t>(unet.input_size) != dataset.base.height ||
        static_cast<size_t>(unet.input_size) != dataset.base.width) {
        throw std::invalid_argument("config: segnet.input_size must match the phantom grid");
    }
}

std::string PipelineConfig::to_json() const {
    ordered_json j;
    j["seed"] = seed;
    j["threads"] = threads;
    j["paths"] = {{"data_dir", paths.data_dir},
                  {"checkpoint_dir", paths.checkpoint_dir},
                  {"output_dir", paths.output_dir}};
    j["phantom"] = {{"n_cases", dataset.n_cases},
                    {"train_fraction", dataset.train_fraction},
                    {"height", dataset.base.height},
                    {"width", dataset.base.width},
                    {"frames", dataset.base.frames},
                    {"endo_radius", dataset.base.endo_radius},
                    {"epi_radius", dataset.base.epi_radius},
                    {"peak_contraction", dataset.base.peak_contraction},
                    {"noise_sigma", dataset.base.noise_sigma},
                    {"rv_insertion_angle", dataset.base.rv_insertion_angle},
                    {"frame_interval_ms", dataset.base.frame_interval_ms},
                    {"pixel_size_mm", dataset.base.pixel_size_mm}};
    j["segnet"] = {{"input_size", unet.input_size},
                   {"base_width", unet.base_width},
                   {"classes", unet.classes},
                   {"lr", seg_hyper.lr},
                   {"batch", seg_hyper.batch},
                   {"steps", seg_hyper.steps},
                   {"val_every", seg_hyper.val_every},
                   {"frames_per_case", seg_frames_per_case},
                   {"augment",
                    {{"enabled", seg_hyper.augment.enabled},
                     {"max_shift_px", seg_hyper.augment.max_shift_px},
                     {"max_rotate_deg", seg_hyper.augment.max_rotate_rad / kDegToRad},
                     {"min_scale", seg_hyper.augment.min_scale},
                     {"max_scale", seg_hyper.augment.max_scale},
                     {"warp_sigma_px", seg_hyper.augment.warp_sigma_px}}}};
    j["tosnet"] = {{"conv_layers", tos_config.conv_layers},
                   {"filters", tos_config.filters},
                   {"kernel", tos_config.kernel},
                   {"dense_width", tos_config.dense_width},
                   {"t_max", tos_config.t_max},
                   {"t0", tos_config.t0},
                   {"alpha", tos_config.alpha},
                   {"input_scale", tos_config.input_scale},
                   {"lr", tos_hyper.lr},
                   {"batch", tos_hyper.batch},
                   {"steps", tos_hyper.steps},
                   {"val_every", tos_hyper.val_every},
                   {"shifts", tos_shifts}};
    j["baseline"] = {{"threshold", baseline_threshold}};
    j["viz"] = {{"rings_per_gap", viz.rings_per_gap},
                {"angular_resolution", viz.angular_resolution},
                {"slice_thickness_mm", viz.slice_thickness_mm}};
    j["assertions"] = {{"min_val_dice", assertions.min_val_dice},
                       {"max_tta_dice_drop", assertions.max_tta_dice_drop},
                       {"max_tos_rmse_frames", assertions.max_tos_rmse_frames},
                       {"max_baseline_rmse_frames", assertions.max_baseline_rmse_frames},
                       {"max_seg_loss_ratio", assertions.max_seg_loss_ratio},
                       {"max_tos_loss_ratio", assertions.max_tos_loss_ratio}};
    return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config: bad JSON: ") + e.what());
    }
    check_keys(j, {"seed", "threads", "paths", "phantom", "segnet", "tosnet", "baseline", "viz",
                   "assertions"},
               "");
    PipelineConfig c;
    get_if(j, "seed", c.seed);
    get_if(j, "threads", c.threads);
    if (j.contains("paths")) {
        const json& p = j.at("paths");
        check_keys(p, {"data_dir", "checkpoint_dir", "output_dir"}, "paths.");
        get_if(p, "data_dir", c.paths.data_dir);
        get_if(p, "checkpoint_dir", c.paths.checkpoint_dir);
        get_if(p, "output_dir", c.paths.output_dir);
    }
    if (j.contains("phantom")) {
        const json& p = j.at("phantom");
        check_keys(p,
                   {"n_cases", "train_fraction", "height", "width", "frames", "endo_radius",
                    "epi_radius", "peak_contraction", "noise_sigma", "rv_insertion_angle",
                    "frame_interval_ms", "pixel_size_mm"},
                   "phantom.");
        get_if(p, "n_cases", c.dataset.n_cases);
        get_if(p, "train_fraction", c.dataset.train_fraction);
        get_if(p, "height", c.dataset.base.height);
        get_if(p, "width", c.dataset.base.width);
        get_if(p, "frames", c.dataset.base.frames);
        get_if(p, "endo_radius", c.dataset.base.endo_radius);
        get_if(p, "epi_radius", c.dataset.base.epi_radius);
        get_if(p, "peak_contraction", c.dataset.base.peak_contraction);
        get_if(p, "noise_sigma", c.dataset.base.noise_sigma);
        get_if(p, "rv_insertion_angle", c.dataset.base.rv_insertion_angle);
        get_if(p, "frame_interval_ms", c.dataset.base.frame_interval_ms);
        get_if(p, "pixel_size_mm", c.dataset.base.pixel_size_mm);
    }
    if (j.contains("segnet")) {
        const json& p = j.at("segnet");
        check_keys(p,
                   {"input_size", "base_width", "classes", "lr", "batch", "steps", "val_every",
                    "frames_per_case", "augment"},
                   "segnet.");
        get_if(p, "input_size", c.unet.input_size);
        get_if(p, "base_width", c.unet.base_width);
        get_if(p, "classes", c.unet.classes);
        get_if(p, "lr", c.seg_hyper.lr);
        get_if(p, "batch", c.seg_hyper.batch);
        get_if(p, "steps", c.seg_hyper.steps);
        get_if(p, "val_every", c.seg_hyper.val_every);
        get_if(p, "frames_per_case", c.seg_frames_per_case);
        if (p.contains("augment")) {
            const json& a = p.at("augment");
            check_keys(a,
                       {"enabled", "max_shift_px", "max_rotate_deg", "min_scale", "max_scale",
                        "warp_sigma_px"},
                       "segnet.augment.");
            get_if(a, "enabled", c.seg_hyper.augment.enabled);
            get_if(a, "max_shift_px", c.seg_hyper.augment.max_shift_px);
            if (a.contains("max_rotate_deg")) {
                c.seg_hyper.augment.max_rotate_rad = a.at("max_rotate_deg").get<double>() *
                                                     kDegToRad;
            }
            get_if(a, "min_scale", c.seg_hyper.augment.min_scale);
            get_if(a, "max_scale", c.seg_hyper.augment.max_scale);
            get_if(a, "warp_sigma_px", c.seg_hyper.augment.warp_sigma_px);
        }
    }
    if (j.contains("tosnet")) {
        const json& p = j.at("tosnet");
        check_keys(p,
                   {"conv_layers", "filters", "kernel", "dense_width", "t_max", "t0", "alpha",
                    "input_scale", "lr", "batch", "steps", "val_every", "shifts"},
                   "tosnet.");
        get_if(p, "conv_layers", c.tos_config.conv_layers);
        get_if(p, "filters", c.tos_config.filters);
        get_if(p, "kernel", c.tos_config.kernel);
        get_if(p, "dense_width", c.tos_config.dense_width);
        get_if(p, "t_max", c.tos_config.t_max);
        get_if(p, "t0", c.tos_config.t0);
        get_if(p, "alpha", c.tos_config.alpha);
        get_if(p, "input_scale", c.tos_config.input_scale);
        get_if(p, "lr", c.tos_hyper.lr);
        get_if(p, "batch", c.tos_hyper.batch);
        get_if(p, "steps", c.tos_hyper.steps);
        get_if(p, "val_every", c.tos_hyper.val_every);
        get_if(p, "shifts", c.tos_shifts);
    }
    if (j.contains("baseline")) {
        const json& p = j.at("baseline");
        check_keys(p, {"threshold"}, "baseline.");
        get_if(p, "threshold", c.baseline_threshold);
    }
    if (j.contains("viz")) {
        const json& p = j.at("viz");
        check_keys(p, {"rings_per_gap", "angular_resolution", "slice_thickness_mm"}, "viz.");
        get_if(p, "rings_per_gap", c.viz.rings_per_gap);
        get_if(p, "angular_resolution", c.viz.angular_resolution);
        get_if(p, "slice_thickness_mm", c.viz.slice_thickness_mm);
    }
    if (j.contains("assertions")) {
        const json& p = j.at("assertions");
        check_keys(p,
                   {"min_val_dice", "max_tta_dice_drop", "max_tos_rmse_frames",
                    "max_baseline_rmse_frames", "max_seg_loss_ratio", "max_tos_loss_ratio"},
                   "assertions.");
        get_if(p, "min_val_dice", c.assertions.min_val_dice);
        get_if(p, "max_tta_dice_drop", c.assertions.max_tta_dice_drop);
        get_if(p, "max_tos_rmse_frames", c.assertions.max_tos_rmse_frames);
        get_if(p, "max_baseline_rmse_frames", c.assertions.max_baseline_rmse_frames);
        get_if(p, "max_seg_loss_ratio", c.assertions.max_seg_loss_ratio);
        get_if(p, "max_tos_loss_ratio", c.assertions.max_tos_loss_ratio);
    }
    // sub-seeds for init and batch sampling all derive from the master seed
    c.seg_hyper.seed = Rng(c.seed).fork(2).next_u64();
    c.tos_hyper.seed = Rng(c.seed).fork(4).next_u64();
    c.dataset.seed = c.seed;
    c.dataset.base.seed = c.seed;
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    PipelineConfig c = from_json(text);
    if (const char* out_dir = std::getenv("LVTOS_OUTPUT_DIR")) {
        c.paths.output_dir = out_dir;
    }
    return c;
}

std::string case_path(const PipelineConfig& config, size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%04zu.tosm", index);
    return join(config.paths.data_dir, buf);
}

segmat::StrainMatrix strain_matrix_for_case(const phantom::PhantomCase& c,
                                            strain::StrainMode mode) {
    const segmat::MyoMask myo = c.myo_mask();
    std::vector<strain::EccField> ecc;
    ecc.reserve(c.spec.frames);
    for (size_t t = 0; t < c.spec.frames; ++t) {
        const strain::JacobianField d = strain::jacobian(c.disp, t);
        const strain::StrainField e = strain::strain_tensor(d, mode);
        ecc.push_back(strain::circumferential_component(e, myo.centroid_x, myo.centroid_y));
    }
    return segmat::build_strain_matrix(ecc, myo, c.spec.frame_interval_ms);
}

phantom::Manifest cmd_phantom_gen(const PipelineConfig& config) {
    fs::create_directories(config.paths.data_dir);
    const phantom::Manifest manifest = phantom::build_manifest(config.dataset);
    for (size_t i = 0; i < config.dataset.n_cases; ++i) {
        const phantom::PhantomCase c = phantom::generate(phantom::case_spec(config.dataset, i));
        c.save(case_path(config, i));
    }
    phantom::write_manifest(join(config.paths.data_dir, "manifest.json"), manifest);
    return manifest;
}

namespace {

std::vector<size_t> split_indices(const phantom::Manifest& manifest, const std::string& split) {
    std::vector<size_t> out;
    for (const phantom::CaseInfo& c : manifest.cases) {
        if (c.split == split) out.push_back(c.index);
    }
    return out;
}

std::vector<phantom::PhantomCase> load_split(const PipelineConfig& config,
                                             const std::string& split) {
    const phantom::Manifest manifest =
        phantom::read_manifest(join(config.paths.data_dir, "manifest.json"));
    std::vector<phantom::PhantomCase> out;
    for (size_t idx : split_indices(manifest, split)) {
        out.push_back(phantom::PhantomCase::load(case_path(config, idx)));
    }
    return out;
}

std::vector<size_t> sample_frames(size_t total_frames, size_t per_case) {
    std::vector<size_t> out;
    if (per_case == 1) {
        out.push_back(total_frames - 1);
        return out;
    }
    for (size_t k = 0; k < per_case; ++k) {
        const double f = static_cast<double>(k) / static_cast<double>(per_case - 1);
        out.push_back(static_cast<size_t>(std::llround(f * static_cast<double>(total_frames - 1))));
    }
    return out;
}

std::vector<segnet::SegSample> seg_samples(const PipelineConfig& config,
                                           const std::vector<phantom::PhantomCase>& cases) {
    std::vector<segnet::SegSample> out;
    for (const phantom::PhantomCase& c : cases) {
        for (size_t t : sample_frames(c.spec.frames, config.seg_frames_per_case)) {
            segnet::SegSample s;
            s.image = Tensor({1, c.spec.height, c.spec.width},
                             std::vector<double>(
                                 c.images.begin() + static_cast<long>(t * c.spec.height *
                                                                      c.spec.width),
                                 c.images.begin() + static_cast<long>((t + 1) * c.spec.height *
                                                                      c.spec.width)));
            s.label = c.frame_masks[t];
            out.push_back(std::move(s));
        }
    }
    return out;
}

std::vector<tosnet::TosSample> tos_samples(const PipelineConfig& config,
                                           const std::vector<phantom::PhantomCase>& cases,
                                           bool augment) {
    std::vector<tosnet::TosSample> out;
    for (const phantom::PhantomCase& c : cases) {
        tosnet::TosSample s;
        s.sm = segmat::pad_time(strain_matrix_for_case(c), config.tos_config.t_max);
        s.tos = c.ground_truth;
        out.push_back(s);
        if (augment) {
            for (int k = 1; k <= config.tos_shifts; ++k) {
                out.push_back(tosnet::cyclic_shift_augment(s, static_cast<size_t>(k)));
            }
        }
    }
    return out;
}

std::string segnet_ckpt(const PipelineConfig& c) {
    return join(c.paths.checkpoint_dir, "segnet.tosm");
}
std::string tosnet_ckpt(const PipelineConfig& c) {
    return join(c.paths.checkpoint_dir, "tosnet.tosm");
}

}  // namespace

segnet::SegTrainResult cmd_train_seg(const PipelineConfig& config) {
    nn::set_threads(config.threads);
    fs::create_directories(config.paths.checkpoint_dir);
    const auto train_cases = load_split(config, "train");
    const auto test_cases = load_split(config, "test");
    const auto train = seg_samples(config, train_cases);
    const auto val = seg_samples(config, test_cases);

    nn::LayerGraph net = segnet::build_unet(config.unet);
    Rng init_rng = Rng(config.seed).fork(1);
    net.init_params(init_rng);
    const segnet::SegTrainResult result = segnet::train_segnet(net, train, val, config.seg_hyper);
    net.save_checkpoint(segnet_ckpt(config));
    segnet::write_train_log_csv(join(config.paths.checkpoint_dir, "segnet_log.csv"), result.log);
    return result;
}

tosnet::TosTrainResult cmd_train_tos(const PipelineConfig& config) {
    nn::set_threads(config.threads);
    fs::create_directories(config.paths.checkpoint_dir);
    const auto train_cases = load_split(config, "train");
    const auto test_cases = load_split(config, "test");
    const auto train = tos_samples(config, train_cases, true);
    const auto val = tos_samples(config, test_cases, false);

    nn::LayerGraph net = tosnet::build_tosnet(config.tos_config);
    Rng init_rng = Rng(config.seed).fork(3);
    net.init_params(init_rng);
    const tosnet::TosTrainResult result =
        tosnet::train_tosnet(net, train, val, config.tos_config, config.tos_hyper);
    net.save_checkpoint(tosnet_ckpt(config));
    tosnet::write_tos_log_csv(join(config.paths.checkpoint_dir, "tosnet_log.csv"), result.log);
    return result;
}

tosnet::CompareReport cmd_compare(const PipelineConfig& config) {
    nn::set_threads(config.threads);
    fs::create_directories(config.paths.output_dir);
    fs::create_directories(join(config.paths.output_dir, "curves"));
    const auto test_cases = load_split(config, "test");
    if (test_cases.empty()) throw std::runtime_error("compare: no test cases");

    nn::LayerGraph net = tosnet::build_tosnet(config.tos_config);
    net.load_checkpoint(tosnet_ckpt(config));

    const phantom::Manifest manifest =
        phantom::read_manifest(join(config.paths.data_dir, "manifest.json"));
    const auto test_idx = split_indices(manifest, "test");

    std::vector<tosnet::CompareCase> cases;
    for (size_t i = 0; i < test_cases.size(); ++i) {
        tosnet::CompareCase cc;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "case_%04zu", test_idx[i]);
        cc.id = buf;
        cc.sm = segmat::pad_time(strain_matrix_for_case(test_cases[i]), config.tos_config.t_max);
        cc.ground_truth = test_cases[i].ground_truth;
        cases.push_back(std::move(cc));
    }
    const tosnet::CompareReport report =
        tosnet::compare_methods(net, config.tos_config, cases, config.baseline_threshold);
    tosnet::write_compare_csv(join(config.paths.output_dir, "compare.csv"), report);
    for (size_t i = 0; i < cases.size(); ++i) {
        const tosnet::CompareRow& cnn_row = report.rows[2 * i];
        const tosnet::CompareRow& base_row = report.rows[2 * i + 1];
        const std::string svg = tosnet::render_tos_curves_svg(
            cases[i].ground_truth, base_row.predicted, cnn_row.predicted, cases[i].id);
        write_text(join(join(config.paths.output_dir, "curves"), cases[i].id + ".svg"), svg);
    }
    return report;
}

aha::SliceStack build_stack_from_predictions(const PipelineConfig& config) {
    const auto test_cases = load_split(config, "test");
    if (test_cases.size() < 4) {
        throw std::runtime_error("stack: need at least 4 test cases for basal/mid/mid/apical");
    }
    nn::LayerGraph net = tosnet::build_tosnet(config.tos_config);
    net.load_checkpoint(tosnet_ckpt(config));

    const aha::SliceLevel levels[4] = {aha::SliceLevel::basal, aha::SliceLevel::mid,
                                       aha::SliceLevel::mid, aha::SliceLevel::apical};
    aha::SliceStack stack;
    stack.rv_insertion_angle = test_cases[0].spec.rv_insertion_angle;
    stack.pixel_size_mm = test_cases[0].spec.pixel_size_mm;
    for (size_t i = 0; i < 4; ++i) {
        const phantom::PhantomCase& c = test_cases[i];
        const segmat::MyoMask myo = c.myo_mask();
        aha::SliceTos slice;
        slice.level = levels[i];
        slice.tos = tosnet::predict_tos(
            net, segmat::pad_time(strain_matrix_for_case(c), config.tos_config.t_max),
            config.tos_config);
        slice.centroid_x = myo.centroid_x;
        slice.centroid_y = myo.centroid_y;
        double radius_sum = 0.0;
        size_t count = 0;
        for (size_t r = 0; r < c.mask.height; ++r) {
            for (size_t col = 0; col < c.mask.width; ++col) {
                if (!c.mask.at(r, col)) continue;
                radius_sum += std::hypot(static_cast<double>(col) - myo.centroid_x,
                                         static_cast<double>(r) - myo.centroid_y);
                ++count;
            }
        }
        slice.mean_radius = radius_sum / static_cast<double>(count);
        slice.z_mm = static_cast<double>(i) * config.viz.slice_thickness_mm;
        stack.slices.push_back(std::move(slice));
    }
    return stack;
}

aha::AhaMap cmd_bullseye(const PipelineConfig& config) {
    fs::create_directories(config.paths.output_dir);
    const aha::SliceStack stack = build_stack_from_predictions(config);
    write_stack_json(join(config.paths.output_dir, "stack.json"), stack);
    const aha::AhaMap map = aha::to_aha(stack);
    write_text(join(config.paths.output_dir, "bullseye.svg"), aha::render_bullseye(map));
    aha::write_aha_csv(join(config.paths.output_dir, "aha_sectors.csv"), map);
    return map;
}

aha::SurfaceMesh cmd_recon3d(const PipelineConfig& config) {
    fs::create_directories(config.paths.output_dir);
    const aha::SliceStack stack = build_stack_from_predictions(config);
    const aha::SurfaceMesh mesh =
        aha::reconstruct_surface(stack, config.viz.rings_per_gap, config.viz.angular_resolution);
    write_text(join(config.paths.output_dir, "surface.txt"), mesh.to_text());
    return mesh;
}

RunAllResult run_all(const PipelineConfig& config) {
    using clock = std::chrono::steady_clock;
    nn::set_threads(config.threads);
    fs::create_directories(config.paths.output_dir);

    ordered_json timings;
    auto timed = [&](const char* stage, auto&& fn) {
        const auto start = clock::now();
        auto value = fn();
        timings[stage] = std::chrono::duration<double>(clock::now() - start).count();
        return value;
    };

    timed("phantom_gen", [&] { return cmd_phantom_gen(config); });
    const segnet::SegTrainResult seg = timed("train_seg", [&] { return cmd_train_seg(config); });
    const tosnet::TosTrainResult tos = timed("train_tos", [&] { return cmd_train_tos(config); });
    const tosnet::CompareReport report = timed("compare", [&] { return cmd_compare(config); });
    timed("bullseye", [&] { return cmd_bullseye(config); });
    timed("recon3d", [&] { return cmd_recon3d(config); });

    // held-out segmentation metrics, plain and rotation-averaged
    const auto eval_start = clock::now();
    nn::LayerGraph seg_net = segnet::build_unet(config.unet);
    seg_net.load_checkpoint(segnet_ckpt(config));
    const auto test_cases = load_split(config, "test");
    const auto val = seg_samples(config, test_cases);
    double dice_plain = 0.0, dice_tta = 0.0, hd = 0.0, msd = 0.0;
    for (const segnet::SegSample& s : val) {
        const Mask plain = segnet::mask_from_prob(segnet::predict(seg_net, s.image));
        const Mask tta = segnet::mask_from_prob(segnet::predict_tta(seg_net, s.image));
        dice_plain += metrics::dice(plain, s.label);
        dice_tta += metrics::dice(tta, s.label);
        hd += metrics::hausdorff(plain, s.label);
        msd += metrics::mean_surface_distance(plain, s.label);
    }
    const double n_val = static_cast<double>(val.size());
    dice_plain /= n_val;
    dice_tta /= n_val;
    hd /= n_val;
    msd /= n_val;
    timings["seg_eval"] = std::chrono::duration<double>(clock::now() - eval_start).count();

    const double seg_ratio = seg.initial_loss > 0.0 ? seg.final_loss / seg.initial_loss : 0.0;
    const double tos_ratio = tos.initial_loss > 0.0 ? tos.final_loss / tos.initial_loss : 0.0;

    RunAllResult result;
    auto check = [&](bool ok, const std::string& name) {
        if (!ok) result.failed_assertions.push_back(name);
        return ok;
    };
    ordered_json checks;
    checks["seg_loss_ratio_ok"] =
        check(seg_ratio < config.assertions.max_seg_loss_ratio, "seg_loss_ratio");
    checks["val_dice_ok"] = check(dice_plain >= config.assertions.min_val_dice, "val_dice");
    checks["tta_dice_ok"] = check(dice_tta >= dice_plain - config.assertions.max_tta_dice_drop,
                                  "tta_dice");
    checks["tos_loss_ratio_ok"] =
        check(tos_ratio < config.assertions.max_tos_loss_ratio, "tos_loss_ratio");
    checks["tos_rmse_ok"] = check(report.aggregate_rmse_frames_tosnet <=
                                      config.assertions.max_tos_rmse_frames,
                                  "tos_rmse");
    checks["baseline_rmse_ok"] = check(report.aggregate_rmse_frames_baseline <=
                                           config.assertions.max_baseline_rmse_frames,
                                       "baseline_rmse");

    ordered_json summary;
    summary["seed"] = config.seed;
    summary["segnet"] = {{"initial_loss", seg.initial_loss},
                         {"final_loss", seg.final_loss},
                         {"loss_ratio", seg_ratio},
                         {"val_dice_plain", dice_plain},
                         {"val_dice_tta", dice_tta},
                         {"val_hausdorff_px", hd},
                         {"val_mean_surface_distance_px", msd}};
    summary["tosnet"] = {{"initial_loss", tos.initial_loss},
                         {"final_loss", tos.final_loss},
                         {"loss_ratio", tos_ratio},
                         {"val_rmse_frames", report.aggregate_rmse_frames_tosnet},
                         {"val_rmse_ms", report.aggregate_rmse_ms_tosnet}};
    summary["baseline"] = {{"val_rmse_frames", report.aggregate_rmse_frames_baseline},
                           {"val_rmse_ms", report.aggregate_rmse_ms_baseline}};
    summary["assertions"] = checks;

    result.summary_path = join(config.paths.output_dir, "summary.json");
    write_text(result.summary_path, summary.dump(2) + "\n");
    write_text(join(config.paths.output_dir, "timings.json"), timings.dump(2) + "\n");
    result.exit_code = result.failed_assertions.empty() ? 0 : 3;
    return result;
}

void write_stack_json(const std::string& path, const aha::SliceStack& stack) {
    ordered_json j;
    j["rv_insertion_angle"] = stack.rv_insertion_angle;
    j["pixel_size_mm"] = stack.pixel_size_mm;
    j["slices"] = ordered_json::array();
    for (const aha::SliceTos& s : stack.slices) {
        ordered_json js;
        js["level"] = aha::slice_level_name(s.level);
        js["z_mm"] = s.z_mm;
        js["centroid_x"] = s.centroid_x;
        js["centroid_y"] = s.centroid_y;
        js["mean_radius"] = s.mean_radius;
        js["tos_frames"] = s.tos.frames;
        js["tos_ms"] = s.tos.ms;
        j["slices"].push_back(js);
    }
    write_text(path, j.dump(2) + "\n");
}

aha::SliceStack read_stack_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("bad stack JSON " + path + ": " + e.what());
    }
    aha::SliceStack stack;
    stack.rv_insertion_angle = j.at("rv_insertion_angle").get<double>();
    stack.pixel_size_mm = j.value("pixel_size_mm", 1.0);
    for (const auto& js : j.at("slices")) {
        aha::SliceTos s;
        s.level = aha::slice_level_from_name(js.at("level").get<std::string>());
        s.z_mm = js.at("z_mm").get<double>();
        s.centroid_x = js.at("centroid_x").get<double>();
        s.centroid_y = js.at("centroid_y").get<double>();
        s.mean_radius = js.at("mean_radius").get<double>();
        const auto& frames = js.at("tos_frames");
        const auto& ms = js.at("tos_ms");
        for (size_t i = 0; i < segmat::kSegments; ++i) {
            s.tos.frames[i] = frames.at(i).get<double>();
            s.tos.ms[i] = ms.at(i).get<double>();
        }
        stack.slices.push_back(std::move(s));
    }
    return stack;
}

}  // namespace lvtos::pipeline

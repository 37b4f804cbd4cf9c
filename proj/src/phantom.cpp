#include "lvtos/phantom.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "lvtos/io.hpp"
#include "lvtos/rng.hpp"

namespace lvtos::phantom {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSegmentAngle = kTwoPi / static_cast<double>(segmat::kSegments);

double smoothstep01(double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return x * x * (3.0 - 2.0 * x);
}

double annulus_profile(double radius, double endo, double epi) {
    const double edge = 1.2;  // pixels
    const double rise = smoothstep01((radius - (endo - edge)) / edge);
    const double fall = 1.0 - smoothstep01((radius - epi) / edge);
    return rise * fall;
}

}  // namespace

double PhantomSpec::resolved_center_x() const {
    return center_x >= 0.0 ? center_x : 0.5 * static_cast<double>(width - 1);
}

double PhantomSpec::resolved_center_y() const {
    return center_y >= 0.0 ? center_y : 0.5 * static_cast<double>(height - 1);
}

void PhantomSpec::validate() const {
    if (height < 8 || width < 8) {
        throw std::invalid_argument("PhantomSpec.height/width: grid too small");
    }
    if (frames < 2) throw std::invalid_argument("PhantomSpec.frames: need at least 2 frames");
    if (!(endo_radius > 0.0)) {
        throw std::invalid_argument("PhantomSpec.endo_radius: must be > 0");
    }
    if (!(epi_radius > endo_radius)) {
        throw std::invalid_argument("PhantomSpec.epi_radius: must exceed endo_radius");
    }
    const double limit = 0.5 * static_cast<double>(std::min(height, width));
    if (!(epi_radius < limit)) {
        throw std::invalid_argument("PhantomSpec.epi_radius: must be < min(H,W)/2");
    }
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        const double d = onset_delay_frames[s];
        if (!(d >= 0.0) || !(d < static_cast<double>(frames))) {
            throw std::invalid_argument("PhantomSpec.onset_delay_frames[" + std::to_string(s) +
                                        "]: must be in [0, frames)");
        }
    }
    if (!(peak_contraction >= 0.0) || !(peak_contraction < 0.5)) {
        throw std::invalid_argument("PhantomSpec.peak_contraction: must be in [0, 0.5)");
    }
    if (noise_sigma < 0.0) throw std::invalid_argument("PhantomSpec.noise_sigma: must be >= 0");
    if (!(frame_interval_ms > 0.0)) {
        throw std::invalid_argument("PhantomSpec.frame_interval_ms: must be > 0");
    }
    if (displacement_noise && displacement_noise_sigma < 0.0) {
        throw std::invalid_argument("PhantomSpec.displacement_noise_sigma: must be >= 0");
    }
}

double segment_contraction(const PhantomSpec& spec, size_t segment, double t) {
    const double tau = t - spec.onset_delay_frames[segment % segmat::kSegments];
    if (tau <= 0.0) return 0.0;
    return spec.peak_contraction * smoothstep01(tau / kOnsetRampFrames);
}

// The blend mixes the adjacent segments' time courses, not their delays; the
// angular gradient then stays bounded by the contraction amplitude instead of
// being amplified by the delay contrast times the ramp slope.
double contraction_at(const PhantomSpec& spec, double theta, double t) {
    const double rel = segmat::wrap_angle_2pi(theta - spec.rv_insertion_angle);
    size_t s = static_cast<size_t>(rel / kSegmentAngle);
    if (s >= segmat::kSegments) s = segmat::kSegments - 1;
    const double frac = rel - static_cast<double>(s) * kSegmentAngle;
    const double half = 0.5 * kAngularBlendRad;
    if (frac < half) {
        const double u = (frac + half) / kAngularBlendRad;
        const size_t prev = (s + segmat::kSegments - 1) % segmat::kSegments;
        const double a = segment_contraction(spec, prev, t);
        return a + smoothstep01(u) * (segment_contraction(spec, s, t) - a);
    }
    if (frac > kSegmentAngle - half) {
        const double u = (frac - (kSegmentAngle - half)) / kAngularBlendRad;
        const double a = segment_contraction(spec, s, t);
        return a + smoothstep01(u) * (segment_contraction(spec, s + 1, t) - a);
    }
    return segment_contraction(spec, s, t);
}

segmat::MyoMask PhantomCase::myo_mask() const {
    return segmat::MyoMask::from_mask(mask, spec.rv_insertion_angle);
}

PhantomCase generate(const PhantomSpec& spec) {
    spec.validate();
    const size_t h = spec.height, w = spec.width, t_count = spec.frames;
    const double cx = spec.resolved_center_x();
    const double cy = spec.resolved_center_y();

    PhantomCase out;
    out.spec = spec;
    out.images.assign(t_count * h * w, 0.0);
    out.frame_masks.assign(t_count, Mask(h, w));
    out.disp.frames = t_count;
    out.disp.height = h;
    out.disp.width = w;
    out.disp.pixel_size_mm = spec.pixel_size_mm;
    out.disp.frame_interval_ms = spec.frame_interval_ms;
    out.disp.u.assign(t_count * h * w * 2, 0.0);

    Rng rng(spec.seed);

    for (size_t t = 0; t < t_count; ++t) {
        for (size_t r = 0; r < h; ++r) {
            for (size_t c = 0; c < w; ++c) {
                const double dx = static_cast<double>(c) - cx;
                const double dy = static_cast<double>(r) - cy;
                const double radius = std::hypot(dx, dy);
                const double theta = std::atan2(dy, dx);
                const double eps =
                    contraction_at(spec, theta, static_cast<double>(t));
                out.disp.ux(t, r, c) = -eps * dx;
                out.disp.uy(t, r, c) = -eps * dy;
                // undeformed radius of the material point now at this pixel
                const double r0 = radius / (1.0 - eps);
                const bool in_myo = r0 >= spec.endo_radius && r0 <= spec.epi_radius;
                out.frame_masks[t].set(r, c, in_myo);
                out.images[(t * h + r) * w + c] =
                    0.1 + 0.8 * annulus_profile(r0, spec.endo_radius, spec.epi_radius);
            }
        }
    }
    // noise goes on the magnitude images only, unless explicitly requested
    if (spec.noise_sigma > 0.0) {
        for (double& v : out.images) v += rng.gauss() * spec.noise_sigma;
    }
    if (spec.displacement_noise && spec.displacement_noise_sigma > 0.0) {
        for (double& v : out.disp.u) v += rng.gauss() * spec.displacement_noise_sigma;
    }

    out.mask = out.frame_masks[0];
    out.ground_truth = segmat::make_tos_curve(spec.onset_delay_frames, spec.frame_interval_ms);
    return out;
}

void PhantomCase::save(const std::string& path) const {
    const size_t h = spec.height, w = spec.width, t_count = spec.frames;
    std::map<std::string, Tensor> entries;
    entries.emplace("images", Tensor({t_count, h, w}, images));
    Tensor mask_t({h, w});
    for (size_t i = 0; i < h * w; ++i) mask_t[i] = mask.data[i] ? 1.0 : 0.0;
    entries.emplace("mask", std::move(mask_t));
    Tensor fm({t_count, h, w});
    for (size_t t = 0; t < t_count; ++t) {
        for (size_t i = 0; i < h * w; ++i) fm[t * h * w + i] = frame_masks[t].data[i] ? 1.0 : 0.0;
    }
    entries.emplace("frame_masks", std::move(fm));
    entries.emplace("disp", disp.to_tensor());
    entries.emplace("tos_frames",
                    Tensor({segmat::kSegments},
                           std::vector<double>(ground_truth.frames.begin(),
                                               ground_truth.frames.end())));
    entries.emplace("tos_ms", Tensor({segmat::kSegments},
                                     std::vector<double>(ground_truth.ms.begin(),
                                                         ground_truth.ms.end())));
    entries.emplace("meta.center",
                    Tensor({2}, {spec.resolved_center_x(), spec.resolved_center_y()}));
    entries.emplace("meta.radii", Tensor({2}, {spec.endo_radius, spec.epi_radius}));
    entries.emplace("meta.rv_insertion_angle", Tensor({1}, {spec.rv_insertion_angle}));
    entries.emplace("meta.frame_interval_ms", Tensor({1}, {spec.frame_interval_ms}));
    entries.emplace("meta.pixel_size_mm", Tensor({1}, {spec.pixel_size_mm}));
    entries.emplace("meta.peak_contraction", Tensor({1}, {spec.peak_contraction}));
    entries.emplace("meta.noise_sigma", Tensor({1}, {spec.noise_sigma}));
    tosm_write(path, entries);
}

PhantomCase PhantomCase::load(const std::string& path) {
    auto entries = tosm_read(path);
    auto need = [&](const std::string& name) -> Tensor& {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw std::runtime_error("phantom case " + path + " missing entry " + name);
        }
        return it->second;
    };
    PhantomCase out;
    Tensor& images = need("images");
    if (images.ndim() != 3) throw std::runtime_error("bad images shape in " + path);
    out.spec.frames = images.dim(0);
    out.spec.height = images.dim(1);
    out.spec.width = images.dim(2);
    out.images = images.values();

    const Tensor& center = need("meta.center");
    out.spec.center_x = center[0];
    out.spec.center_y = center[1];
    const Tensor& radii = need("meta.radii");
    out.spec.endo_radius = radii[0];
    out.spec.epi_radius = radii[1];
    out.spec.rv_insertion_angle = need("meta.rv_insertion_angle")[0];
    out.spec.frame_interval_ms = need("meta.frame_interval_ms")[0];
    out.spec.pixel_size_mm = need("meta.pixel_size_mm")[0];
    out.spec.peak_contraction = need("meta.peak_contraction")[0];
    out.spec.noise_sigma = need("meta.noise_sigma")[0];

    const size_t h = out.spec.height, w = out.spec.width, t_count = out.spec.frames;
    const Tensor& mask = need("mask");
    if (mask.shape() != std::vector<size_t>{h, w}) {
        throw std::runtime_error("bad mask shape in " + path);
    }
    out.mask = Mask(h, w);
    for (size_t i = 0; i < h * w; ++i) out.mask.data[i] = mask[i] != 0.0;
    const Tensor& fm = need("frame_masks");
    if (fm.shape() != std::vector<size_t>{t_count, h, w}) {
        throw std::runtime_error("bad frame_masks shape in " + path);
    }
    out.frame_masks.assign(t_count, Mask(h, w));
    for (size_t t = 0; t < t_count; ++t) {
        for (size_t i = 0; i < h * w; ++i) out.frame_masks[t].data[i] = fm[t * h * w + i] != 0.0;
    }
    out.disp = strain::DisplacementField::from_tensor(need("disp"), out.spec.pixel_size_mm,
                                                      out.spec.frame_interval_ms);
    const Tensor& tf = need("tos_frames");
    if (tf.size() != segmat::kSegments) throw std::runtime_error("bad tos_frames in " + path);
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        out.ground_truth.frames[s] = tf[s];
        out.spec.onset_delay_frames[s] = tf[s];
    }
    const Tensor& tms = need("tos_ms");
    if (tms.size() != segmat::kSegments) throw std::runtime_error("bad tos_ms in " + path);
    for (size_t s = 0; s < segmat::kSegments; ++s) out.ground_truth.ms[s] = tms[s];
    return out;
}

PhantomSpec case_spec(const DatasetSpec& ds, size_t index) {
    if (index >= ds.n_cases) {
        throw std::out_of_range("case index " + std::to_string(index) + " out of range");
    }
    Rng rng = Rng(ds.seed).fork(index);
    PhantomSpec spec = ds.base;
    spec.seed = rng.next_u64();
    const uint64_t max_delay = ds.base.frames / 2;
    for (size_t s = 0; s < segmat::kSegments; ++s) {
        spec.onset_delay_frames[s] = static_cast<double>(rng.below(max_delay + 1));
    }
    spec.endo_radius = ds.base.endo_radius * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
    spec.epi_radius = ds.base.epi_radius * (1.0 + 0.1 * rng.uniform(-1.0, 1.0));
    spec.validate();
    return spec;
}

std::vector<PhantomCase> make_dataset(const DatasetSpec& ds) {
    std::vector<PhantomCase> out;
    out.reserve(ds.n_cases);
    for (size_t i = 0; i < ds.n_cases; ++i) out.push_back(generate(case_spec(ds, i)));
    return out;
}

Manifest build_manifest(const DatasetSpec& ds) {
    if (ds.n_cases < 1) throw std::invalid_argument("dataset needs at least one case");
    if (!(ds.train_fraction >= 0.0) || !(ds.train_fraction <= 1.0)) {
        throw std::invalid_argument("train_fraction must be in [0, 1]");
    }
    Manifest m;
    m.n_cases = ds.n_cases;
    m.n_train = static_cast<size_t>(
        std::llround(ds.train_fraction * static_cast<double>(ds.n_cases)));
    m.seed = ds.seed;
    for (size_t i = 0; i < ds.n_cases; ++i) {
        const PhantomSpec spec = case_spec(ds, i);
        CaseInfo info;
        info.index = i;
        info.seed = spec.seed;
        info.split = i < m.n_train ? "train" : "test";
        info.onset_delay_frames = spec.onset_delay_frames;
        info.endo_radius = spec.endo_radius;
        info.epi_radius = spec.epi_radius;
        m.cases.push_back(info);
    }
    return m;
}

std::string manifest_to_json(const Manifest& m) {
    nlohmann::ordered_json j;
    j["n_cases"] = m.n_cases;
    j["n_train"] = m.n_train;
    j["seed"] = m.seed;
    j["cases"] = nlohmann::ordered_json::array();
    for (const CaseInfo& c : m.cases) {
        nlohmann::ordered_json jc;
        jc["index"] = c.index;
        jc["seed"] = c.seed;
        jc["split"] = c.split;
        jc["onset_delay_frames"] = c.onset_delay_frames;
        jc["endo_radius"] = c.endo_radius;
        jc["epi_radius"] = c.epi_radius;
        j["cases"].push_back(jc);
    }
    return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << manifest_to_json(m);
    if (!f) throw std::runtime_error("write failed: " + path);
}

Manifest read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("bad manifest JSON " + path + ": " + e.what());
    }
    Manifest m;
    m.n_cases = j.at("n_cases").get<size_t>();
    m.n_train = j.at("n_train").get<size_t>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& jc : j.at("cases")) {
        CaseInfo c;
        c.index = jc.at("index").get<size_t>();
        c.seed = jc.at("seed").get<uint64_t>();
        c.split = jc.at("split").get<std::string>();
        const auto& delays = jc.at("onset_delay_frames");
        for (size_t s = 0; s < segmat::kSegments; ++s) {
            c.onset_delay_frames[s] = delays.at(s).get<double>();
        }
        c.endo_radius = jc.at("endo_radius").get<double>();
        c.epi_radius = jc.at("epi_radius").get<double>();
        m.cases.push_back(c);
    }
    return m;
}

}  // namespace lvtos::phantom

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lvtos/mask.hpp"
#include "lvtos/segmat.hpp"
#include "lvtos/strain.hpp"

namespace lvtos::phantom {

// Synthetic left-ventricle case generator. Motion is inward-radial: a material
// point at radius r contracts to (1 - eps(theta, t)) * r, where eps ramps from
// 0 to peak_contraction with a 3-frame smoothstep starting at the owning
// segment's onset delay, with C1 angular blending across segment boundaries.
struct PhantomSpec {
    size_t height = 64;
    size_t width = 64;
    size_t frames = 24;
    double center_x = -1.0;  // < 0 means grid center
    double center_y = -1.0;
    double endo_radius = 10.0;
    double epi_radius = 17.0;
    std::array<double, segmat::kSegments> onset_delay_frames{};
    double peak_contraction = 0.10;
    double noise_sigma = 0.02;
    double rv_insertion_angle = 0.0;
    double frame_interval_ms = 17.0;
    double pixel_size_mm = 2.65;
    bool displacement_noise = false;
    double displacement_noise_sigma = 0.0;
    uint64_t seed = 1;

    double resolved_center_x() const;
    double resolved_center_y() const;
    void validate() const;  // throws with field-level diagnostics
};

inline constexpr double kOnsetRampFrames = 3.0;
inline constexpr double kAngularBlendRad = 0.17453292519943295;  // 10 degrees

// one segment's contraction time course
double segment_contraction(const PhantomSpec& spec, size_t segment, double t);
// contraction fraction eps(theta, t) with the angular blend applied
double contraction_at(const PhantomSpec& spec, double theta, double t);

struct PhantomCase {
    PhantomSpec spec;
    std::vector<double> images;  // [T][H][W]
    Mask mask;                   // reference myocardium (frame 0)
    std::vector<Mask> frame_masks;
    strain::DisplacementField disp;
    segmat::TosCurve ground_truth;

    double image_at(size_t t, size_t r, size_t c) const {
        return images[(t * spec.height + r) * spec.width + c];
    }

    segmat::MyoMask myo_mask() const;

    void save(const std::string& path) const;
    static PhantomCase load(const std::string& path);
};

PhantomCase generate(const PhantomSpec& spec);

struct DatasetSpec {
    PhantomSpec base;
    size_t n_cases = 25;
    double train_fraction = 0.8;
    uint64_t seed = 1;
};

struct CaseInfo {
    size_t index = 0;
    uint64_t seed = 0;
    std::string split;  // "train" or "test"
    std::array<double, segmat::kSegments> onset_delay_frames{};
    double endo_radius = 0.0;
    double epi_radius = 0.0;
};

struct Manifest {
    size_t n_cases = 0;
    size_t n_train = 0;
    uint64_t seed = 0;
    std::vector<CaseInfo> cases;
};

// Deterministic per-case randomization: onset delays uniform integers in
// [0, T/2], radii jittered +-10%, derived from (seed, case index).
PhantomSpec case_spec(const DatasetSpec& ds, size_t index);
Manifest build_manifest(const DatasetSpec& ds);

// all cases generated in index order; parallel and serial generation agree
// because every case has its own derived stream
std::vector<PhantomCase> make_dataset(const DatasetSpec& ds);

std::string manifest_to_json(const Manifest& m);
void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace lvtos::phantom

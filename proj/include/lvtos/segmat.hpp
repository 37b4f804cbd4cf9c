#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lvtos/mask.hpp"
#include "lvtos/strain.hpp"

namespace lvtos::segmat {

inline constexpr size_t kSegments = 18;

// Left-ventricle myocardium mask with its angular reference: segment 0 starts
// at the RV insertion angle and segments advance counterclockwise in image
// coordinates (x along columns, y along rows).
struct MyoMask {
    Mask mask;
    double centroid_x = 0.0;  // arithmetic mean of mask pixel coordinates
    double centroid_y = 0.0;
    double rv_insertion_angle = 0.0;  // radians about the centroid

    static MyoMask from_mask(Mask mask, double rv_insertion_angle);
};

size_t segment_index(size_t row, size_t col, const MyoMask& myo);

// 18 segments x T frames of circumferential strain.
struct StrainMatrix {
    size_t frames = 0;
    double frame_interval_ms = 17.0;
    std::vector<double> values;  // [kSegments][frames]

    double at(size_t s, size_t t) const { return values[s * frames + t]; }
    double& at(size_t s, size_t t) { return values[s * frames + t]; }
};

struct TosCurve {
    std::array<double, kSegments> frames{};
    std::array<double, kSegments> ms{};
    std::array<uint8_t, kSegments> no_onset{};  // set by baseline_tos for rows that never cross
};

std::array<double, kSegments> frames_to_ms(const std::array<double, kSegments>& tos_frames,
                                           double interval_ms);
TosCurve make_tos_curve(const std::array<double, kSegments>& tos_frames, double interval_ms);

// Entry (s, t) is the mean Ecc over the segment's representative sample: mask
// pixels within +-pi/36 of the segment's central angle, radially between 25%
// and 75% of the local wall span.
StrainMatrix build_strain_matrix(const std::vector<strain::EccField>& ecc_frames,
                                 const MyoMask& myo, double frame_interval_ms);

StrainMatrix pad_time(const StrainMatrix& sm, size_t t_max);

// Threshold-crossing onset oracle: first frame where the row reaches the
// (negative) threshold and stays there for the following frame, with linear
// interpolation for the fractional crossing. Rows that never cross get T-1
// and are flagged.
TosCurve baseline_tos(const StrainMatrix& sm, double threshold);

void write_strain_matrix_csv(const std::string& path, const StrainMatrix& sm);
StrainMatrix read_strain_matrix_csv(const std::string& path);
void write_tos_csv(const std::string& path, const TosCurve& tos);
TosCurve read_tos_csv(const std::string& path);

// angle helpers shared across modules
double wrap_angle_2pi(double a);                // into [0, 2pi)
double pixel_angle(double row, double col, double center_x, double center_y);

}  // namespace lvtos::segmat

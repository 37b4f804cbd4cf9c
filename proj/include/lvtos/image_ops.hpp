#pragma once

#include <array>
#include <vector>

#include "lvtos/mask.hpp"
#include "lvtos/rng.hpp"
#include "lvtos/tensor.hpp"

namespace lvtos::img {

// Rotate a [C,H,W] tensor counterclockwise (image coordinates) about the image
// center, bilinear interpolation, zero fill outside. angle == 0 is an exact copy.
Tensor rotate_bilinear(const Tensor& chw, double angle_rad);

// Geometric augmentation parameters applied identically to image and label.
// The warp is a coarse random offset grid, bilinearly interpolated; it stands
// in for free-form smooth deformations.
struct GeomTransform {
    double shift_x = 0.0;
    double shift_y = 0.0;
    double angle = 0.0;
    double scale = 1.0;
    static constexpr int kWarpGrid = 4;
    std::array<double, kWarpGrid * kWarpGrid * 2> warp{};  // pixel offsets
};

struct AugmentConfig {
    double max_shift_px = 4.0;
    double max_rotate_rad = 0.3490658503988659;  // 20 degrees
    double min_scale = 0.9;
    double max_scale = 1.1;
    double warp_sigma_px = 1.5;
    bool enabled = true;
};

GeomTransform sample_transform(const AugmentConfig& cfg, Rng& rng);

// Image sampled bilinearly (zero fill), label nearest-neighbor (background fill).
Tensor apply_transform_image(const Tensor& chw, const GeomTransform& t);
Mask apply_transform_mask(const Mask& mask, const GeomTransform& t);

}  // namespace lvtos::img

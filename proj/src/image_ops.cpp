#include "lvtos/image_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace lvtos::img {

namespace {

double sample_bilinear(const double* plane, size_t h, size_t w, double y, double x) {
    if (x <= -1.0 || y <= -1.0 || x >= static_cast<double>(w) || y >= static_cast<double>(h)) {
        return 0.0;
    }
    const double fx = std::floor(x), fy = std::floor(y);
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = x - fx, ay = y - fy;
    auto at = [&](int yy, int xx) -> double {
        if (yy < 0 || xx < 0 || yy >= static_cast<int>(h) || xx >= static_cast<int>(w)) return 0.0;
        return plane[static_cast<size_t>(yy) * w + xx];
    };
    return (1.0 - ay) * ((1.0 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
           ay * ((1.0 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
}

// source position for an output pixel under the inverse of shift/rotate/scale,
// plus the coarse warp offset evaluated at the output pixel
void inverse_map(const GeomTransform& t, double cx, double cy, double oy, double ox, size_t h,
                 size_t w, double& sy, double& sx) {
    double px = ox - cx - t.shift_x;
    double py = oy - cy - t.shift_y;
    const double ca = std::cos(-t.angle), sa = std::sin(-t.angle);
    const double rx = ca * px - sa * py;
    const double ry = sa * px + ca * py;
    sx = cx + rx / t.scale;
    sy = cy + ry / t.scale;

    // bilinear warp offsets from the control grid, indexed by output position
    const int g = GeomTransform::kWarpGrid;
    const double gx = ox / static_cast<double>(w - 1) * (g - 1);
    const double gy = oy / static_cast<double>(h - 1) * (g - 1);
    int ix = static_cast<int>(std::floor(gx)), iy = static_cast<int>(std::floor(gy));
    if (ix >= g - 1) ix = g - 2;
    if (iy >= g - 1) iy = g - 2;
    const double ax = gx - ix, ay = gy - iy;
    auto warp_at = [&](int yy, int xx, int comp) {
        return t.warp[(static_cast<size_t>(yy) * g + xx) * 2 + comp];
    };
    for (int comp = 0; comp < 2; ++comp) {
        const double v = (1.0 - ay) * ((1.0 - ax) * warp_at(iy, ix, comp) +
                                       ax * warp_at(iy, ix + 1, comp)) +
                         ay * ((1.0 - ax) * warp_at(iy + 1, ix, comp) +
                               ax * warp_at(iy + 1, ix + 1, comp));
        if (comp == 0) sx += v;
        else sy += v;
    }
}

}  // namespace

Tensor rotate_bilinear(const Tensor& chw, double angle_rad) {
    if (chw.ndim() != 3) {
        throw std::invalid_argument("rotate_bilinear: expected [C,H,W], got " +
                                    shape_to_string(chw.shape()));
    }
    if (angle_rad == 0.0) return chw;
    const size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    const double cx = 0.5 * static_cast<double>(w - 1);
    const double cy = 0.5 * static_cast<double>(h - 1);
    const double ca = std::cos(-angle_rad), sa = std::sin(-angle_rad);
    Tensor out(chw.shape());
    for (size_t ch = 0; ch < c; ++ch) {
        const double* src = chw.data() + ch * h * w;
        double* dst = out.data() + ch * h * w;
        for (size_t r = 0; r < h; ++r) {
            for (size_t col = 0; col < w; ++col) {
                const double px = static_cast<double>(col) - cx;
                const double py = static_cast<double>(r) - cy;
                const double sx = cx + ca * px - sa * py;
                const double sy = cy + sa * px + ca * py;
                dst[r * w + col] = sample_bilinear(src, h, w, sy, sx);
            }
        }
    }
    return out;
}

GeomTransform sample_transform(const AugmentConfig& cfg, Rng& rng) {
    GeomTransform t;
    if (!cfg.enabled) return t;
    t.shift_x = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    t.shift_y = rng.uniform(-cfg.max_shift_px, cfg.max_shift_px);
    t.angle = rng.uniform(-cfg.max_rotate_rad, cfg.max_rotate_rad);
    t.scale = rng.uniform(cfg.min_scale, cfg.max_scale);
    for (double& v : t.warp) v = rng.gauss() * cfg.warp_sigma_px;
    return t;
}

Tensor apply_transform_image(const Tensor& chw, const GeomTransform& t) {
    if (chw.ndim() != 3) {
        throw std::invalid_argument("apply_transform_image: expected [C,H,W]");
    }
    const size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
    const double cx = 0.5 * static_cast<double>(w - 1);
    const double cy = 0.5 * static_cast<double>(h - 1);
    Tensor out(chw.shape());
    for (size_t ch = 0; ch < c; ++ch) {
        const double* src = chw.data() + ch * h * w;
        double* dst = out.data() + ch * h * w;
        for (size_t r = 0; r < h; ++r) {
            for (size_t col = 0; col < w; ++col) {
                double sy, sx;
                inverse_map(t, cx, cy, static_cast<double>(r), static_cast<double>(col), h, w, sy,
                            sx);
                dst[r * w + col] = sample_bilinear(src, h, w, sy, sx);
            }
        }
    }
    return out;
}

// Labels resample through the same bilinear kernel as images, thresholded at
// 0.5, so a mask pushed through the image path lands on the label exactly.
Mask apply_transform_mask(const Mask& mask, const GeomTransform& t) {
    const size_t h = mask.height, w = mask.width;
    const double cx = 0.5 * static_cast<double>(w - 1);
    const double cy = 0.5 * static_cast<double>(h - 1);
    std::vector<double> plane(h * w);
    for (size_t i = 0; i < h * w; ++i) plane[i] = mask.data[i] ? 1.0 : 0.0;
    Mask out(h, w);
    for (size_t r = 0; r < h; ++r) {
        for (size_t col = 0; col < w; ++col) {
            double sy, sx;
            inverse_map(t, cx, cy, static_cast<double>(r), static_cast<double>(col), h, w, sy, sx);
            out.set(r, col, sample_bilinear(plane.data(), h, w, sy, sx) > 0.5);
        }
    }
    return out;
}

}  // namespace lvtos::img

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvtos/tensor.hpp"

namespace lvtos::strain {

// Time-indexed 2-D displacement field on a periodic grid. Components are in
// pixel units: ux along columns (x), uy along rows (y).
struct DisplacementField {
    size_t frames = 0;
    size_t height = 0;
    size_t width = 0;
    double pixel_size_mm = 1.0;
    double frame_interval_ms = 17.0;
    std::vector<double> u;  // [T][H][W][2]

    double ux(size_t t, size_t r, size_t c) const {
        return u[(((t * height) + r) * width + c) * 2];
    }
    double uy(size_t t, size_t r, size_t c) const {
        return u[(((t * height) + r) * width + c) * 2 + 1];
    }
    double& ux(size_t t, size_t r, size_t c) { return u[(((t * height) + r) * width + c) * 2]; }
    double& uy(size_t t, size_t r, size_t c) {
        return u[(((t * height) + r) * width + c) * 2 + 1];
    }

    void validate() const;  // finite values, grid dims >= 3

    Tensor to_tensor() const;  // shape T x H x W x 2
    static DisplacementField from_tensor(const Tensor& t, double pixel_size_mm,
                                         double frame_interval_ms);
};

// Per-pixel 2x2 Jacobian of the displacement, entries (dux/dx, dux/dy, duy/dx, duy/dy).
struct JacobianField {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> d;  // [H][W][4]

    double at(size_t r, size_t c, size_t k) const { return d[(r * width + c) * 4 + k]; }
    double& at(size_t r, size_t c, size_t k) { return d[(r * width + c) * 4 + k]; }
};

// Symmetric per-pixel strain tensor, entries (exx, exy, eyy).
struct StrainField {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> e;  // [H][W][3]

    double exx(size_t r, size_t c) const { return e[(r * width + c) * 3]; }
    double exy(size_t r, size_t c) const { return e[(r * width + c) * 3 + 1]; }
    double eyy(size_t r, size_t c) const { return e[(r * width + c) * 3 + 2]; }
};

struct EccField {
    size_t height = 0;
    size_t width = 0;
    std::vector<double> values;          // [H][W]
    std::vector<uint8_t> center_flag;    // 1 where the tangent is undefined (pixel == center)

    double at(size_t r, size_t c) const { return values[r * width + c]; }
};

enum class StrainMode {
    deformation_gradient,  // E = 1/2 (F^T F - I), F = I + D  (default)
    literal,               // E = 1/2 (D^T D - I)
};

// Central differences with periodic wraparound (the grid is a torus).
JacobianField jacobian(const DisplacementField& field, size_t frame);

StrainField strain_tensor(const JacobianField& d,
                          StrainMode mode = StrainMode::deformation_gradient);

// Strain tensor from an analytically given Jacobian at a single point.
void strain_tensor_point(const double d[4], StrainMode mode, double e_out[3]);

// Projection onto the local circumferential direction about (center_x, center_y):
// Ecc(p) = c^T E(p) c with c = (-sin th, cos th) the unit tangent at p.
EccField circumferential_component(const StrainField& e, double center_x, double center_y);

void write_ecc_csv(const std::string& path, const std::vector<EccField>& frames);

}  // namespace lvtos::strain

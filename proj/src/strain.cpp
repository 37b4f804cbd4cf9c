#include "lvtos/strain.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "lvtos/io.hpp"

namespace lvtos::strain {

void DisplacementField::validate() const {
    if (height < 3 || width < 3) {
        throw std::invalid_argument("displacement field grid must be at least 3x3, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    if (u.size() != frames * height * width * 2) {
        throw std::invalid_argument("displacement field data size does not match T*H*W*2");
    }
    for (double v : u) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("displacement field contains non-finite values");
        }
    }
}

Tensor DisplacementField::to_tensor() const {
    return Tensor({frames, height, width, 2}, u);
}

DisplacementField DisplacementField::from_tensor(const Tensor& t, double pixel_size_mm,
                                                 double frame_interval_ms) {
    if (t.ndim() != 4 || t.dim(3) != 2) {
        throw std::invalid_argument("displacement tensor must have shape TxHxWx2, got " +
                                    shape_to_string(t.shape()));
    }
    DisplacementField f;
    f.frames = t.dim(0);
    f.height = t.dim(1);
    f.width = t.dim(2);
    f.pixel_size_mm = pixel_size_mm;
    f.frame_interval_ms = frame_interval_ms;
    f.u = t.values();
    f.validate();
    return f;
}

JacobianField jacobian(const DisplacementField& field, size_t frame) {
    field.validate();
    if (frame >= field.frames) {
        throw std::out_of_range("jacobian: frame " + std::to_string(frame) + " out of range [0," +
                                std::to_string(field.frames) + ")");
    }
    const size_t h = field.height, w = field.width;
    JacobianField out;
    out.height = h;
    out.width = w;
    out.d.assign(h * w * 4, 0.0);
    for (size_t r = 0; r < h; ++r) {
        const size_t rm = (r + h - 1) % h, rp = (r + 1) % h;
        for (size_t c = 0; c < w; ++c) {
            const size_t cm = (c + w - 1) % w, cp = (c + 1) % w;
            // x runs along columns, y along rows; spacing is one pixel
            out.at(r, c, 0) = 0.5 * (field.ux(frame, r, cp) - field.ux(frame, r, cm));
            out.at(r, c, 1) = 0.5 * (field.ux(frame, rp, c) - field.ux(frame, rm, c));
            out.at(r, c, 2) = 0.5 * (field.uy(frame, r, cp) - field.uy(frame, r, cm));
            out.at(r, c, 3) = 0.5 * (field.uy(frame, rp, c) - field.uy(frame, rm, c));
        }
    }
    return out;
}

void strain_tensor_point(const double d[4], StrainMode mode, double e_out[3]) {
    double f11 = d[0], f12 = d[1], f21 = d[2], f22 = d[3];
    if (mode == StrainMode::deformation_gradient) {
        f11 += 1.0;
        f22 += 1.0;
    }
    // 1/2 (F^T F - I); symmetric by construction
    e_out[0] = 0.5 * (f11 * f11 + f21 * f21 - 1.0);
    e_out[1] = 0.5 * (f11 * f12 + f21 * f22);
    e_out[2] = 0.5 * (f12 * f12 + f22 * f22 - 1.0);
}

StrainField strain_tensor(const JacobianField& d, StrainMode mode) {
    StrainField out;
    out.height = d.height;
    out.width = d.width;
    out.e.assign(d.height * d.width * 3, 0.0);
    for (size_t i = 0; i < d.height * d.width; ++i) {
        strain_tensor_point(&d.d[i * 4], mode, &out.e[i * 3]);
    }
    return out;
}

EccField circumferential_component(const StrainField& e, double center_x, double center_y) {
    if (center_x < 0 || center_y < 0 || center_x > static_cast<double>(e.width - 1) ||
        center_y > static_cast<double>(e.height - 1)) {
        throw std::invalid_argument("circumferential_component: center outside grid");
    }
    EccField out;
    out.height = e.height;
    out.width = e.width;
    out.values.assign(e.height * e.width, 0.0);
    out.center_flag.assign(e.height * e.width, 0);
    for (size_t r = 0; r < e.height; ++r) {
        for (size_t c = 0; c < e.width; ++c) {
            const double dx = static_cast<double>(c) - center_x;
            const double dy = static_cast<double>(r) - center_y;
            if (dx == 0.0 && dy == 0.0) {
                out.center_flag[r * e.width + c] = 1;
                continue;  // tangent undefined; value stays 0
            }
            const double th = std::atan2(dy, dx);
            const double s = std::sin(th), co = std::cos(th);
            // c = (-sin th, cos th)
            out.values[r * e.width + c] =
                s * s * e.exx(r, c) - 2.0 * s * co * e.exy(r, c) + co * co * e.eyy(r, c);
        }
    }
    return out;
}

void write_ecc_csv(const std::string& path, const std::vector<EccField>& frames) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "frame,row,col,value\n";
    for (size_t t = 0; t < frames.size(); ++t) {
        const EccField& e = frames[t];
        for (size_t r = 0; r < e.height; ++r) {
            for (size_t c = 0; c < e.width; ++c) {
                f << t << "," << r << "," << c << "," << fmt_double(e.at(r, c)) << "\n";
            }
        }
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lvtos::strain

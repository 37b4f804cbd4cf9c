#include "lvtos/aha.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lvtos/io.hpp"

namespace lvtos::aha {

using segmat::kSegments;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kSegmentAngle = kTwoPi / static_cast<double>(kSegments);
}  // namespace

const char* slice_level_name(SliceLevel level) {
    switch (level) {
        case SliceLevel::basal: return "basal";
        case SliceLevel::mid: return "mid";
        case SliceLevel::apical: return "apical";
    }
    return "unknown";
}

SliceLevel slice_level_from_name(const std::string& name) {
    if (name == "basal") return SliceLevel::basal;
    if (name == "mid") return SliceLevel::mid;
    if (name == "apical") return SliceLevel::apical;
    throw std::invalid_argument("unknown slice level: " + name);
}

void SliceStack::validate() const {
    if (slices.size() < 2) {
        throw std::invalid_argument("SliceStack: need at least two slices");
    }
    for (size_t i = 1; i < slices.size(); ++i) {
        if (!(slices[i].z_mm > slices[i - 1].z_mm)) {
            throw std::invalid_argument("SliceStack: z positions must strictly increase");
        }
    }
}

namespace {

std::array<double, kSegments> mean_level_tos(const SliceStack& stack, SliceLevel level) {
    std::array<double, kSegments> sum{};
    size_t count = 0;
    for (const SliceTos& s : stack.slices) {
        if (s.level != level) continue;
        for (size_t i = 0; i < kSegments; ++i) sum[i] += s.tos.ms[i];
        ++count;
    }
    if (count == 0) {
        throw std::invalid_argument(std::string("to_aha: missing ") + slice_level_name(level) +
                                    " slice");
    }
    for (double& v : sum) v /= static_cast<double>(count);
    return sum;
}

}  // namespace

AhaMap to_aha(const SliceStack& stack) {
    stack.validate();
    const auto basal = mean_level_tos(stack, SliceLevel::basal);
    const auto mid = mean_level_tos(stack, SliceLevel::mid);
    const auto apical = mean_level_tos(stack, SliceLevel::apical);

    AhaMap map;
    for (size_t k = 0; k < 6; ++k) {
        map.tos_ms[k] = (basal[3 * k] + basal[3 * k + 1] + basal[3 * k + 2]) / 3.0;
        map.tos_ms[6 + k] = (mid[3 * k] + mid[3 * k + 1] + mid[3 * k + 2]) / 3.0;
    }
    // apical: four 90-degree sectors over 18 20-degree segments, weighted by
    // angular overlap (exact partition: each sector's weights sum to 90)
    for (size_t j = 0; j < 4; ++j) {
        const double lo = static_cast<double>(j) * 90.0;
        const double hi = lo + 90.0;
        double weighted = 0.0;
        for (size_t s = 0; s < kSegments; ++s) {
            const double seg_lo = static_cast<double>(s) * 20.0;
            const double seg_hi = seg_lo + 20.0;
            const double overlap = std::max(0.0, std::min(hi, seg_hi) - std::max(lo, seg_lo));
            weighted += overlap * apical[s];
        }
        map.tos_ms[12 + j] = weighted / 90.0;
    }
    double apex = 0.0;
    for (size_t s = 0; s < kSegments; ++s) apex += apical[s];
    map.tos_ms[16] = apex / static_cast<double>(kSegments);
    return map;
}

std::string tos_color(double value, double lo, double hi) {
    double t = 0.5;
    if (hi - lo > 1e-12) t = (value - lo) / (hi - lo);
    t = std::clamp(t, 0.0, 1.0);
    // blue (30,60,255) -> white (255,255,255) -> dark red (170,0,0)
    double r, g, b;
    if (t <= 0.5) {
        const double u = t / 0.5;
        r = 30.0 + u * (255.0 - 30.0);
        g = 60.0 + u * (255.0 - 60.0);
        b = 255.0;
    } else {
        const double u = (t - 0.5) / 0.5;
        r = 255.0 + u * (170.0 - 255.0);
        g = 255.0 * (1.0 - u);
        b = 255.0 * (1.0 - u);
    }
    std::ostringstream os;
    os << "rgb(" << static_cast<int>(std::lround(r)) << "," << static_cast<int>(std::lround(g))
       << "," << static_cast<int>(std::lround(b)) << ")";
    return os.str();
}

namespace {

// Screen angle: the RV-insertion anchor points at 12 o'clock; sector angles
// advance counterclockwise in image coordinates (y down).
void polar_point(double cx, double cy, double radius, double angle_deg, double& x, double& y) {
    const double a = (angle_deg - 90.0) * kTwoPi / 360.0;
    x = cx + radius * std::cos(a);
    y = cy + radius * std::sin(a);
}

std::string sector_path(double cx, double cy, double r_in, double r_out, double a0_deg,
                        double a1_deg) {
    double x0, y0, x1, y1, x2, y2, x3, y3;
    polar_point(cx, cy, r_out, a0_deg, x0, y0);
    polar_point(cx, cy, r_out, a1_deg, x1, y1);
    polar_point(cx, cy, r_in, a1_deg, x2, y2);
    polar_point(cx, cy, r_in, a0_deg, x3, y3);
    std::ostringstream os;
    os << "M " << fmt_fixed(x0, 3) << " " << fmt_fixed(y0, 3) << " A " << fmt_fixed(r_out, 3)
       << " " << fmt_fixed(r_out, 3) << " 0 0 1 " << fmt_fixed(x1, 3) << " " << fmt_fixed(y1, 3)
       << " L " << fmt_fixed(x2, 3) << " " << fmt_fixed(y2, 3) << " A " << fmt_fixed(r_in, 3)
       << " " << fmt_fixed(r_in, 3) << " 0 0 0 " << fmt_fixed(x3, 3) << " " << fmt_fixed(y3, 3)
       << " Z";
    return os.str();
}

}  // namespace

std::string render_bullseye(const AhaMap& map) {
    for (double v : map.tos_ms) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("render_bullseye: non-finite sector value");
        }
    }
    const double cx = 230.0, cy = 230.0;
    double lo = map.tos_ms[0], hi = map.tos_ms[0];
    for (double v : map.tos_ms) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"460\" "
          "viewBox=\"0 0 560 460\">\n";
    os << "  <rect width=\"560\" height=\"460\" fill=\"white\"/>\n";

    auto emit_sector = [&](size_t sector_id, double r_in, double r_out, double a0, double a1) {
        const double v = map.tos_ms[sector_id - 1];
        os << "  <path class=\"sector\" id=\"sector" << sector_id << "\" d=\""
           << sector_path(cx, cy, r_in, r_out, a0, a1) << "\" fill=\"" << tos_color(v, lo, hi)
           << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        const double mid_angle = 0.5 * (a0 + a1);
        double tx, ty;
        polar_point(cx, cy, 0.5 * (r_in + r_out), mid_angle, tx, ty);
        os << "  <text x=\"" << fmt_fixed(tx, 3) << "\" y=\"" << fmt_fixed(ty + 4.0, 3)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
           << sector_id << "</text>\n";
    };

    for (size_t k = 0; k < 6; ++k) {
        const double a0 = static_cast<double>(k) * 60.0, a1 = a0 + 60.0;
        emit_sector(1 + k, 150.0, 200.0, a0, a1);
        emit_sector(7 + k, 100.0, 150.0, a0, a1);
    }
    for (size_t j = 0; j < 4; ++j) {
        const double a0 = static_cast<double>(j) * 90.0, a1 = a0 + 90.0;
        emit_sector(13 + j, 50.0, 100.0, a0, a1);
    }
    // apex disk
    os << "  <circle class=\"sector\" id=\"sector17\" cx=\"" << fmt_fixed(cx, 3) << "\" cy=\""
       << fmt_fixed(cy, 3) << "\" r=\"50\" fill=\"" << tos_color(map.tos_ms[16], lo, hi)
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    os << "  <text x=\"" << fmt_fixed(cx, 3) << "\" y=\"" << fmt_fixed(cy + 4.0, 3)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">17</text>\n";

    // color bar, latest activation at the top
    const int bar_steps = 32;
    const double bar_x = 480.0, bar_y0 = 80.0, bar_y1 = 380.0;
    for (int i = 0; i < bar_steps; ++i) {
        const double f0 = static_cast<double>(i) / bar_steps;
        const double y_top = bar_y1 - (bar_y1 - bar_y0) * static_cast<double>(i + 1) / bar_steps;
        const double h = (bar_y1 - bar_y0) / bar_steps;
        os << "  <rect x=\"" << fmt_fixed(bar_x, 3) << "\" y=\"" << fmt_fixed(y_top, 3)
           << "\" width=\"24\" height=\"" << fmt_fixed(h + 0.5, 3) << "\" fill=\""
           << tos_color(lo + (hi - lo) * (f0 + 0.5 / bar_steps), lo, hi) << "\"/>\n";
    }
    os << "  <rect x=\"" << fmt_fixed(bar_x, 3) << "\" y=\"" << fmt_fixed(bar_y0, 3)
       << "\" width=\"24\" height=\"" << fmt_fixed(bar_y1 - bar_y0, 3)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "  <text x=\"" << fmt_fixed(bar_x + 30.0, 3) << "\" y=\"" << fmt_fixed(bar_y0 + 4.0, 3)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_fixed(hi, 1) << " ms</text>\n";
    os << "  <text x=\"" << fmt_fixed(bar_x + 30.0, 3) << "\" y=\"" << fmt_fixed(bar_y1 + 4.0, 3)
       << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_fixed(lo, 1) << " ms</text>\n";
    os << "</svg>\n";
    return os.str();
}

void write_aha_csv(const std::string& path, const AhaMap& map) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "sector,tos_ms\n";
    for (size_t i = 0; i < 17; ++i) {
        f << (i + 1) << "," << fmt_double(map.tos_ms[i]) << "\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

namespace {

// periodic linear interpolation between the 18 segment-center angles
double tos_at_angle(const segmat::TosCurve& tos, double rv_angle, double angle) {
    const double first_center = rv_angle + 0.5 * kSegmentAngle;
    const double rel = segmat::wrap_angle_2pi(angle - first_center);
    double pos = rel / kSegmentAngle;
    if (pos >= static_cast<double>(kSegments)) pos = 0.0;
    const size_t s0 = static_cast<size_t>(pos) % kSegments;
    const size_t s1 = (s0 + 1) % kSegments;
    const double frac = pos - std::floor(pos);
    return (1.0 - frac) * tos.ms[s0] + frac * tos.ms[s1];
}

struct Ring {
    double cx, cy, radius, z;
    const SliceTos* a;
    const SliceTos* b;
    double f;  // interpolation fraction between a and b
};

}  // namespace

SurfaceMesh reconstruct_surface(const SliceStack& stack, int rings_per_gap,
                                int angular_resolution) {
    stack.validate();
    if (rings_per_gap < 1) {
        throw std::invalid_argument("reconstruct_surface: rings_per_gap must be >= 1");
    }
    if (angular_resolution < 3) {
        throw std::invalid_argument("reconstruct_surface: angular_resolution must be >= 3");
    }
    for (const SliceTos& s : stack.slices) {
        if (!(s.mean_radius > 0.0)) {
            throw std::invalid_argument("reconstruct_surface: degenerate slice radius");
        }
    }

    std::vector<Ring> rings;
    rings.push_back({stack.slices[0].centroid_x, stack.slices[0].centroid_y,
                     stack.slices[0].mean_radius, stack.slices[0].z_mm, &stack.slices[0],
                     &stack.slices[0], 0.0});
    for (size_t i = 0; i + 1 < stack.slices.size(); ++i) {
        const SliceTos& a = stack.slices[i];
        const SliceTos& b = stack.slices[i + 1];
        for (int j = 1; j <= rings_per_gap; ++j) {
            const double f = static_cast<double>(j) / static_cast<double>(rings_per_gap);
            rings.push_back({a.centroid_x + f * (b.centroid_x - a.centroid_x),
                             a.centroid_y + f * (b.centroid_y - a.centroid_y),
                             a.mean_radius + f * (b.mean_radius - a.mean_radius),
                             a.z_mm + f * (b.z_mm - a.z_mm), &a, &b, f});
        }
    }

    SurfaceMesh mesh;
    const size_t a_res = static_cast<size_t>(angular_resolution);
    for (const Ring& ring : rings) {
        for (size_t m = 0; m < a_res; ++m) {
            const double angle = kTwoPi * static_cast<double>(m) / static_cast<double>(a_res);
            MeshVertex v;
            v.x = (ring.cx + ring.radius * std::cos(angle)) * stack.pixel_size_mm;
            v.y = (ring.cy + ring.radius * std::sin(angle)) * stack.pixel_size_mm;
            v.z = ring.z;
            const double va = tos_at_angle(ring.a->tos, stack.rv_insertion_angle, angle);
            const double vb = tos_at_angle(ring.b->tos, stack.rv_insertion_angle, angle);
            v.scalar = (1.0 - ring.f) * va + ring.f * vb;
            mesh.vertices.push_back(v);
        }
    }
    for (size_t k = 0; k + 1 < rings.size(); ++k) {
        for (size_t m = 0; m < a_res; ++m) {
            const size_t m1 = (m + 1) % a_res;
            const size_t v00 = k * a_res + m;
            const size_t v01 = k * a_res + m1;
            const size_t v10 = (k + 1) * a_res + m;
            const size_t v11 = (k + 1) * a_res + m1;
            mesh.faces.push_back({v00, v01, v11});
            mesh.faces.push_back({v00, v11, v10});
        }
    }
    return mesh;
}

std::string SurfaceMesh::to_text() const {
    std::ostringstream os;
    os << "# lv activation surface: v x_mm y_mm z_mm tos_ms | f i j k (1-based)\n";
    for (const MeshVertex& v : vertices) {
        os << "v " << fmt_fixed(v.x, 6) << " " << fmt_fixed(v.y, 6) << " " << fmt_fixed(v.z, 6)
           << " " << fmt_fixed(v.scalar, 6) << "\n";
    }
    for (const auto& f : faces) {
        os << "f " << (f[0] + 1) << " " << (f[1] + 1) << " " << (f[2] + 1) << "\n";
    }
    return os.str();
}

}  // namespace lvtos::aha

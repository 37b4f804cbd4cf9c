#pragma once

#include <array>
#include <string>
#include <vector>

#include "lvtos/segmat.hpp"

namespace lvtos::aha {

enum class SliceLevel { basal, mid, apical };

const char* slice_level_name(SliceLevel level);
SliceLevel slice_level_from_name(const std::string& name);

struct SliceTos {
    SliceLevel level = SliceLevel::basal;
    segmat::TosCurve tos;
    double centroid_x = 0.0;  // pixels
    double centroid_y = 0.0;
    double mean_radius = 0.0;  // pixels
    double z_mm = 0.0;
};

// Ordered base-to-apex slice stack sharing one RV-insertion reference angle.
struct SliceStack {
    std::vector<SliceTos> slices;
    double rv_insertion_angle = 0.0;
    double pixel_size_mm = 1.0;

    void validate() const;  // >= 2 slices, z strictly increasing
};

// 17-sector activation map, AHA numbering: 1-6 basal, 7-12 mid, 13-16 apical,
// 17 apex. Sector 1 is anchored at the RV-insertion reference angle.
struct AhaMap {
    std::array<double, 17> tos_ms{};
};

// Basal and mid rings aggregate 3 consecutive segments per sector (mid slices
// averaged first); the four apical sectors use angular-overlap weights over
// the 18 segments (each 90-degree sector covers 4.5 segments); the apex is the
// mean apical TOS.
AhaMap to_aha(const SliceStack& stack);

std::string render_bullseye(const AhaMap& map);
void write_aha_csv(const std::string& path, const AhaMap& map);

struct MeshVertex {
    double x = 0.0, y = 0.0, z = 0.0;  // mm
    double scalar = 0.0;               // TOS in ms
};

struct SurfaceMesh {
    std::vector<MeshVertex> vertices;
    std::vector<std::array<size_t, 3>> faces;  // 0-based indices

    std::string to_text() const;  // "v x y z scalar" / "f i j k" (1-based) lines
};

// Ring surface through the slice centroids: rings_per_gap extra rings are
// linearly interpolated between adjacent slices, each ring carries
// angular_resolution vertices with TOS interpolated linearly in angle between
// the 18 segment centers (periodic) and linearly in z. Closed in angle, no
// duplicated seam vertices.
SurfaceMesh reconstruct_surface(const SliceStack& stack, int rings_per_gap,
                                int angular_resolution);

// documented piecewise-linear colormap blue -> white -> dark red over [lo, hi]
std::string tos_color(double value, double lo, double hi);

}  // namespace lvtos::aha

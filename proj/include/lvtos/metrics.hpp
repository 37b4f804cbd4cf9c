#pragma once

#include <utility>
#include <vector>

#include "lvtos/mask.hpp"

namespace lvtos::metrics {

// 2|A n B| / (|A| + |B|); both masks empty counts as perfect agreement (1.0).
double dice(const Mask& a, const Mask& b);

// mask pixels with at least one off-mask 4-neighbor (outside the grid counts
// as off-mask)
std::vector<std::pair<int, int>> boundary_pixels(const Mask& m);

// symmetric Hausdorff distance between boundary point sets, Euclidean pixels
double hausdorff(const Mask& a, const Mask& b);

// mean over the union of both boundaries of the nearest-opposite-boundary
// distance: (sum_a min_b d + sum_b min_a d) / (|A| + |B|)
double mean_surface_distance(const Mask& a, const Mask& b);

struct SegMetrics {
    double dice = 0.0;
    double hausdorff_px = 0.0;
    double mean_surface_distance_px = 0.0;
};

SegMetrics evaluate_masks(const Mask& predicted, const Mask& truth);

}  // namespace lvtos::metrics

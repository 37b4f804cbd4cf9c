#include "lvtos/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lvtos::metrics {

namespace {

void check_shapes(const Mask& a, const Mask& b, const char* what) {
    if (a.height != b.height || a.width != b.width) {
        throw std::invalid_argument(std::string(what) + ": mask shapes differ");
    }
}

double min_sq_dist(const std::pair<int, int>& p, const std::vector<std::pair<int, int>>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : set) {
        const double dy = p.first - q.first;
        const double dx = p.second - q.second;
        const double d = dy * dy + dx * dx;
        if (d < best) best = d;
    }
    return best;
}

}  // namespace

double dice(const Mask& a, const Mask& b) {
    check_shapes(a, b, "dice");
    size_t na = 0, nb = 0, inter = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        na += va;
        nb += vb;
        inter += va && vb;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

std::vector<std::pair<int, int>> boundary_pixels(const Mask& m) {
    std::vector<std::pair<int, int>> out;
    const int h = static_cast<int>(m.height), w = static_cast<int>(m.width);
    auto off = [&](int r, int c) {
        return r < 0 || c < 0 || r >= h || c >= w || !m.at(static_cast<size_t>(r),
                                                           static_cast<size_t>(c));
    };
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!m.at(static_cast<size_t>(r), static_cast<size_t>(c))) continue;
            if (off(r - 1, c) || off(r + 1, c) || off(r, c - 1) || off(r, c + 1)) {
                out.emplace_back(r, c);
            }
        }
    }
    return out;
}

double hausdorff(const Mask& a, const Mask& b) {
    check_shapes(a, b, "hausdorff");
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    if (ba.empty() || bb.empty()) {
        throw std::invalid_argument("hausdorff: masks must be nonempty");
    }
    double worst = 0.0;
    for (const auto& p : ba) worst = std::max(worst, min_sq_dist(p, bb));
    for (const auto& p : bb) worst = std::max(worst, min_sq_dist(p, ba));
    return std::sqrt(worst);
}

double mean_surface_distance(const Mask& a, const Mask& b) {
    check_shapes(a, b, "mean_surface_distance");
    const auto ba = boundary_pixels(a);
    const auto bb = boundary_pixels(b);
    if (ba.empty() || bb.empty()) {
        throw std::invalid_argument("mean_surface_distance: masks must be nonempty");
    }
    // directed sums kept separate so the result is exactly symmetric
    double sum_ab = 0.0, sum_ba = 0.0;
    for (const auto& p : ba) sum_ab += std::sqrt(min_sq_dist(p, bb));
    for (const auto& p : bb) sum_ba += std::sqrt(min_sq_dist(p, ba));
    return (sum_ab + sum_ba) / static_cast<double>(ba.size() + bb.size());
}

SegMetrics evaluate_masks(const Mask& predicted, const Mask& truth) {
    SegMetrics m;
    m.dice = dice(predicted, truth);
    m.hausdorff_px = hausdorff(predicted, truth);
    m.mean_surface_distance_px = mean_surface_distance(predicted, truth);
    return m;
}

}  // namespace lvtos::metrics

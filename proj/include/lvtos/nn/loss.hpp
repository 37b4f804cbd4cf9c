#pragma once

#include <vector>

#include "lvtos/tensor.hpp"

namespace lvtos::nn {

// Mean squared error over all elements. Fills *grad (d loss / d pred) when given.
double loss_mse(const Tensor& pred, const Tensor& target, Tensor* grad = nullptr);

struct SegLossParts {
    double total = 0.0;
    double cross_entropy = 0.0;  // mean per pixel, class-weighted
    double dice = 0.0;           // sum over foreground classes of (1 - soft dice)
};

// Weighted pixel-wise cross entropy plus soft dice over foreground classes.
// prob is a per-pixel class distribution [N,C,H,W] (rows sum to 1 within 1e-6),
// label is one-hot with the same shape. Probabilities are clamped at 1e-7
// before the log; soft dice uses smoothing constant 1 in numerator and
// denominator so empty masks stay defined.
SegLossParts loss_weighted_ce_soft_dice(const Tensor& prob, const Tensor& label,
                                        const std::vector<double>& class_weights,
                                        Tensor* grad = nullptr);

inline constexpr double kCeClampFloor = 1e-7;
inline constexpr double kDiceSmooth = 1.0;

}  // namespace lvtos::nn

#include "lvtos/nn/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace lvtos::nn {

double loss_mse(const Tensor& pred, const Tensor& target, Tensor* grad) {
    if (!pred.same_shape(target)) {
        throw std::invalid_argument("loss_mse: shape mismatch " + shape_to_string(pred.shape()) +
                                    " vs " + shape_to_string(target.shape()));
    }
    const double m = static_cast<double>(pred.size());
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        sum += d * d;
    }
    if (grad) {
        *grad = Tensor(pred.shape());
        for (size_t i = 0; i < pred.size(); ++i) {
            (*grad)[i] = 2.0 * (pred[i] - target[i]) / m;
        }
    }
    return sum / m;
}

SegLossParts loss_weighted_ce_soft_dice(const Tensor& prob, const Tensor& label,
                                        const std::vector<double>& class_weights, Tensor* grad) {
    if (!prob.same_shape(label)) {
        throw std::invalid_argument("seg loss: prob/label shape mismatch");
    }
    if (prob.ndim() < 2) {
        throw std::invalid_argument("seg loss: expected >= 2-d tensors");
    }
    const size_t n = prob.dim(0);
    const size_t c = prob.dim(1);
    size_t inner = 1;
    for (size_t i = 2; i < prob.ndim(); ++i) inner *= prob.dim(i);
    if (class_weights.size() != c) {
        throw std::invalid_argument("seg loss: got " + std::to_string(class_weights.size()) +
                                    " class weights for " + std::to_string(c) + " classes");
    }

    for (size_t b = 0; b < n; ++b) {
        for (size_t p = 0; p < inner; ++p) {
            double psum = 0.0, lsum = 0.0;
            for (size_t ch = 0; ch < c; ++ch) {
                const size_t idx = (b * c + ch) * inner + p;
                psum += prob[idx];
                const double lv = label[idx];
                if (lv != 0.0 && lv != 1.0) {
                    throw std::invalid_argument("seg loss: label is not one-hot");
                }
                lsum += lv;
            }
            if (std::abs(psum - 1.0) > 1e-6) {
                throw std::invalid_argument("seg loss: prob rows must sum to 1 (got " +
                                            std::to_string(psum) + ")");
            }
            if (lsum != 1.0) {
                throw std::invalid_argument("seg loss: label is not one-hot");
            }
        }
    }

    const double npix = static_cast<double>(n * inner);
    SegLossParts parts;

    if (grad) *grad = Tensor(prob.shape());

    // weighted cross entropy, mean per pixel
    for (size_t b = 0; b < n; ++b) {
        for (size_t ch = 0; ch < c; ++ch) {
            const double w = class_weights[ch];
            for (size_t p = 0; p < inner; ++p) {
                const size_t idx = (b * c + ch) * inner + p;
                if (label[idx] == 1.0) {
                    const double pv = std::max(prob[idx], kCeClampFloor);
                    parts.cross_entropy -= w * std::log(pv);
                    if (grad && prob[idx] >= kCeClampFloor) {
                        (*grad)[idx] -= w / (prob[idx] * npix);
                    }
                }
            }
        }
    }
    parts.cross_entropy /= npix;

    // soft dice over foreground classes, pooled over the batch
    for (size_t ch = 1; ch < c; ++ch) {
        double isum = 0.0, psum = 0.0, gsum = 0.0;
        for (size_t b = 0; b < n; ++b) {
            for (size_t p = 0; p < inner; ++p) {
                const size_t idx = (b * c + ch) * inner + p;
                isum += prob[idx] * label[idx];
                psum += prob[idx];
                gsum += label[idx];
            }
        }
        const double denom = psum + gsum + kDiceSmooth;
        const double dice = (2.0 * isum + kDiceSmooth) / denom;
        parts.dice += 1.0 - dice;
        if (grad) {
            for (size_t b = 0; b < n; ++b) {
                for (size_t p = 0; p < inner; ++p) {
                    const size_t idx = (b * c + ch) * inner + p;
                    const double ddice =
                        (2.0 * label[idx] * denom - (2.0 * isum + kDiceSmooth)) / (denom * denom);
                    (*grad)[idx] -= ddice;
                }
            }
        }
    }

    parts.total = parts.cross_entropy + parts.dice;
    return parts;
}

}  // namespace lvtos::nn

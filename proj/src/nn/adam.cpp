#include "lvtos/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace lvtos::nn {

Adam::Adam(AdamConfig config, const std::vector<std::pair<std::string, Tensor*>>& params)
    : config_(config) {
    if (!(config_.lr > 0.0) || !(config_.epsilon > 0.0) || !(config_.beta1 >= 0.0) ||
        !(config_.beta1 < 1.0) || !(config_.beta2 >= 0.0) || !(config_.beta2 < 1.0)) {
        throw std::invalid_argument("Adam: invalid hyperparameters");
    }
    for (const auto& [name, t] : params) {
        params_.push_back(t);
        names_.push_back(name);
        m_.emplace_back(t->size(), 0.0);
        v_.emplace_back(t->size(), 0.0);
    }
}

void Adam::step() {
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (size_t k = 0; k < params_.size(); ++k) {
        Tensor& p = *params_[k];
        if (!p.has_grad()) {
            throw std::invalid_argument("Adam: parameter " + names_[k] + " has no gradient");
        }
        if (p.size() != m_[k].size()) {
            throw std::invalid_argument("Adam: parameter " + names_[k] +
                                        " changed shape after optimizer construction");
        }
        const double* g = p.grad();
        double* m = m_[k].data();
        double* v = v_[k].data();
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace lvtos::nn

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lvtos/tensor.hpp"

namespace lvtos::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam with bias correction. Moment buffers are allocated per parameter at
// construction and must keep matching shapes for the optimizer's lifetime.
class Adam {
public:
    Adam(AdamConfig config, const std::vector<std::pair<std::string, Tensor*>>& params);

    // one update from the gradients currently held in each parameter's grad buffer
    void step();

    size_t step_count() const { return step_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    std::vector<Tensor*> params_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    size_t step_ = 0;
};

}  // namespace lvtos::nn

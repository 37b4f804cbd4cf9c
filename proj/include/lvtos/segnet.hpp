#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lvtos/image_ops.hpp"
#include "lvtos/mask.hpp"
#include "lvtos/metrics.hpp"
#include "lvtos/nn/graph.hpp"

namespace lvtos::segnet {

// Four symmetric encode/decode blocks. Encode blocks are two (dilated conv
// 3x3, dilation 2, batchnorm, ReLU) sets with 3x3/stride-2 max pooling between
// blocks; decode blocks are two (transposed conv 3x3, batchnorm, ReLU) sets,
// the first at stride 2 where the path upsamples, with encoder skips
// concatenated; 1x1 conv head and per-pixel softmax.
struct UNetConfig {
    size_t input_size = 64;
    int base_width = 8;
    int classes = 2;
    double bn_momentum = 0.9;

    void validate() const;
};

nn::LayerGraph build_unet(const UNetConfig& config);

struct SegSample {
    Tensor image;  // [1,H,W]
    Mask label;
};

struct SegnetHyper {
    double lr = 1e-4;
    int batch = 8;
    int steps = 200;
    uint64_t seed = 1;
    int val_every = 25;
    img::AugmentConfig augment;
};

struct TrainLogRow {
    int step = 0;
    double loss = 0.0;
    double val_dice = -1.0;  // < 0 when not evaluated at this step
};

struct SegTrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_val_dice = -1.0;
    std::vector<TrainLogRow> log;
};

SegTrainResult train_segnet(nn::LayerGraph& net, const std::vector<SegSample>& train,
                            const std::vector<SegSample>& val, const SegnetHyper& hyper);

// plain single-pass class probabilities, [classes,H,W]
Tensor predict(nn::LayerGraph& net, const Tensor& image);

// test-time rotation averaging: mean over k of rotate(-a_k, net(rotate(a_k, x))),
// renormalized per pixel. Default angles are k*40 degrees for k = 0..8.
Tensor predict_tta(nn::LayerGraph& net, const Tensor& image, int rotations = 9,
                   double step_deg = 40.0);

Mask mask_from_prob(const Tensor& prob, double threshold = 0.5);

double mean_val_dice(nn::LayerGraph& net, const std::vector<SegSample>& val);

void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log);

// per-batch inverse class-frequency weights; classes absent from the batch get 0
std::vector<double> inverse_frequency_weights(const Tensor& onehot);

}  // namespace lvtos::segnet

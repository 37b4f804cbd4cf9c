#pragma once

#include <string>
#include <vector>

#include "lvtos/nn/graph.hpp"
#include "lvtos/segmat.hpp"

namespace lvtos::tosnet {

// Regression CNN over the 18 x T_max strain matrix treated as a one-channel
// image: conv/ReLU stack, one hidden dense layer, a dense layer to 18 outputs,
// and the shifted leaky ReLU floor so every activation time lands at or after
// the first scan time t0.
struct TosNetConfig {
    int conv_layers = 3;
    int filters = 16;
    int kernel = 3;
    int dense_width = 256;
    size_t t_max = 32;
    double t0 = 0.0;
    double alpha = 0.01;
    // strain values are ~0.1 in magnitude while targets are frame counts;
    // scaling the input keeps the first layer well conditioned
    double input_scale = 10.0;

    void validate() const;
};

nn::LayerGraph build_tosnet(const TosNetConfig& config);

struct TosSample {
    segmat::StrainMatrix sm;  // padded to t_max
    segmat::TosCurve tos;
};

// Rotate strain-matrix rows and TOS entries by k segments, same direction;
// the time axis is untouched.
TosSample cyclic_shift_augment(const TosSample& sample, size_t k);

struct TosnetHyper {
    double lr = 1e-4;
    int batch = 32;
    int steps = 500;
    uint64_t seed = 1;
    int val_every = 50;
};

struct TosLogRow {
    int step = 0;
    double loss = 0.0;
    double val_rmse_frames = -1.0;
};

struct TosTrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double final_val_rmse_frames = -1.0;
    std::vector<TosLogRow> log;
};

TosTrainResult train_tosnet(nn::LayerGraph& net, const std::vector<TosSample>& train,
                            const std::vector<TosSample>& val, const TosNetConfig& config,
                            const TosnetHyper& hyper);

segmat::TosCurve predict_tos(nn::LayerGraph& net, const segmat::StrainMatrix& sm,
                             const TosNetConfig& config);

// root mean squared error across the 18 segments, in frames
double rmse_frames(const segmat::TosCurve& a, const segmat::TosCurve& b);

double val_rmse_frames(nn::LayerGraph& net, const std::vector<TosSample>& val,
                       const TosNetConfig& config);

struct CompareCase {
    std::string id;
    segmat::StrainMatrix sm;  // padded to t_max
    segmat::TosCurve ground_truth;
};

struct CompareRow {
    std::string id;
    std::string method;  // "tosnet" or "baseline"
    double rmse_frames = 0.0;
    double rmse_ms = 0.0;
    double wall_ms = 0.0;
    segmat::TosCurve predicted;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    double aggregate_rmse_frames_tosnet = 0.0;
    double aggregate_rmse_frames_baseline = 0.0;
    double aggregate_rmse_ms_tosnet = 0.0;
    double aggregate_rmse_ms_baseline = 0.0;
};

CompareReport compare_methods(nn::LayerGraph& net, const TosNetConfig& config,
                              const std::vector<CompareCase>& cases, double baseline_threshold);

void write_compare_csv(const std::string& path, const CompareReport& report);

// three polylines over segment index: ground truth (black), baseline (blue),
// network estimate (orange)
std::string render_tos_curves_svg(const segmat::TosCurve& truth, const segmat::TosCurve& baseline,
                                  const segmat::TosCurve& estimated, const std::string& title);

void write_tos_log_csv(const std::string& path, const std::vector<TosLogRow>& log);

}  // namespace lvtos::tosnet

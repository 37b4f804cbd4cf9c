#pragma once

#include <string>
#include <vector>

#include "lvtos/aha.hpp"
#include "lvtos/phantom.hpp"
#include "lvtos/segnet.hpp"
#include "lvtos/tosnet.hpp"

namespace lvtos::pipeline {

struct Paths {
    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string output_dir = "out";
};

struct VizConfig {
    int rings_per_gap = 4;
    int angular_resolution = 72;
    double slice_thickness_mm = 8.0;
};

struct Assertions {
    double min_val_dice = 0.9;
    double max_tta_dice_drop = 0.02;
    double max_tos_rmse_frames = 1.5;
    double max_baseline_rmse_frames = 1.0;
    double max_seg_loss_ratio = 0.5;
    double max_tos_loss_ratio = 0.9;
};

// Full-scale values from the source protocol (lr 1e-4, batch 300, 1000
// epochs) are reachable through this config; defaults are desk scale.
struct PipelineConfig {
    uint64_t seed = 1;
    int threads = 1;
    Paths paths;
    phantom::DatasetSpec dataset{.n_cases = 40, .train_fraction = 0.8};
    segnet::UNetConfig unet;
    segnet::SegnetHyper seg_hyper{.lr = 1e-3, .batch = 8, .steps = 300};
    size_t seg_frames_per_case = 4;
    tosnet::TosNetConfig tos_config;
    tosnet::TosnetHyper tos_hyper{.lr = 1e-3, .batch = 32, .steps = 1800};
    int tos_shifts = 17;  // cyclic augmentation copies per training matrix
    double baseline_threshold = -0.01;
    VizConfig viz;
    Assertions assertions;

    void validate() const;
    std::string to_json() const;
    static PipelineConfig from_json(const std::string& text);  // strict: unknown keys rejected
    static PipelineConfig from_json_file(const std::string& path);
};

std::string case_path(const PipelineConfig& config, size_t index);

// circumferential strain matrix of one case: per-frame Jacobian (periodic
// central differences), strain tensor, Ecc about the mask centroid, segment
// sampling
segmat::StrainMatrix strain_matrix_for_case(
    const phantom::PhantomCase& c,
    strain::StrainMode mode = strain::StrainMode::deformation_gradient);

// subcommand bodies; every one reads/writes files so run_all is literally the
// composition of the individual commands
phantom::Manifest cmd_phantom_gen(const PipelineConfig& config);
segnet::SegTrainResult cmd_train_seg(const PipelineConfig& config);
tosnet::TosTrainResult cmd_train_tos(const PipelineConfig& config);
tosnet::CompareReport cmd_compare(const PipelineConfig& config);
aha::AhaMap cmd_bullseye(const PipelineConfig& config);
aha::SurfaceMesh cmd_recon3d(const PipelineConfig& config);

struct RunAllResult {
    int exit_code = 0;  // 0 ok, 3 when an acceptance assertion fails
    std::string summary_path;
    std::vector<std::string> failed_assertions;
};

RunAllResult run_all(const PipelineConfig& config);

// stack of the first four test-split cases with predicted TOS curves, levels
// basal/mid/mid/apical, spaced by the configured slice thickness
aha::SliceStack build_stack_from_predictions(const PipelineConfig& config);

aha::SliceStack read_stack_json(const std::string& path);
void write_stack_json(const std::string& path, const aha::SliceStack& stack);

}  // namespace lvtos::pipeline

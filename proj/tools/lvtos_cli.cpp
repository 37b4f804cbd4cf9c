// Command-line front end for the phantom-to-activation-map pipeline.
// Exit codes: 0 success, 1 usage error, 2 data/format error,
// 3 acceptance-assertion failure in run-all.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lvtos/aha.hpp"
#include "lvtos/io.hpp"
#include "lvtos/nn/graph.hpp"
#include "lvtos/phantom.hpp"
#include "lvtos/pipeline.hpp"
#include "lvtos/segmat.hpp"
#include "lvtos/strain.hpp"
#include "lvtos/tosnet.hpp"

namespace {

using lvtos::pipeline::PipelineConfig;

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::vector<lvtos::strain::EccField> ecc_frames_for_case(const lvtos::phantom::PhantomCase& c,
                                                         lvtos::strain::StrainMode mode) {
    const lvtos::segmat::MyoMask myo = c.myo_mask();
    std::vector<lvtos::strain::EccField> ecc;
    for (size_t t = 0; t < c.spec.frames; ++t) {
        const auto d = lvtos::strain::jacobian(c.disp, t);
        const auto e = lvtos::strain::strain_tensor(d, mode);
        ecc.push_back(lvtos::strain::circumferential_component(e, myo.centroid_x, myo.centroid_y));
    }
    return ecc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic LV strain analysis and activation-time mapping"};
    app.require_subcommand(1);

    std::string config_path;
    std::string case_file;
    std::string out_path;
    std::string sm_path;
    std::string stack_path;
    std::string mode_name = "deformation-gradient";

    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "pipeline config JSON")->required();
    };

    CLI::App* gen = app.add_subcommand("phantom-gen", "generate the synthetic dataset");
    add_config(gen);

    CLI::App* strain_cmd =
        app.add_subcommand("strain-compute", "circumferential strain field of one case");
    strain_cmd->add_option("--case", case_file, "phantom case container")->required();
    strain_cmd->add_option("--out", out_path, "Ecc CSV output path")->required();
    strain_cmd->add_option("--mode", mode_name, "deformation-gradient (default) or literal");

    CLI::App* segmat_cmd = app.add_subcommand("segmat-build", "18xT strain matrix of one case");
    segmat_cmd->add_option("--case", case_file, "phantom case container")->required();
    segmat_cmd->add_option("--out", out_path, "strain matrix CSV output path")->required();
    segmat_cmd->add_option("--mode", mode_name, "deformation-gradient (default) or literal");

    CLI::App* train_seg = app.add_subcommand("train-seg", "train the segmentation network");
    add_config(train_seg);

    CLI::App* train_tos = app.add_subcommand("train-tos", "train the activation-time network");
    add_config(train_tos);

    CLI::App* predict = app.add_subcommand("predict-tos", "predict a TOS curve from a matrix");
    add_config(predict);
    predict->add_option("--sm", sm_path, "strain matrix CSV")->required();
    predict->add_option("--out", out_path, "TOS CSV output path")->required();

    CLI::App* compare = app.add_subcommand("compare", "network vs threshold baseline on test cases");
    add_config(compare);

    CLI::App* bullseye = app.add_subcommand("bullseye", "17-sector activation plot");
    add_config(bullseye);
    bullseye->add_option("--stack", stack_path, "slice stack JSON (default: predictions)");

    CLI::App* recon = app.add_subcommand("recon3d", "activation surface mesh");
    add_config(recon);
    recon->add_option("--stack", stack_path, "slice stack JSON (default: predictions)");

    CLI::App* runall = app.add_subcommand("run-all", "full pipeline plus summary");
    add_config(runall);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto mode = [&] {
            if (mode_name == "deformation-gradient") {
                return lvtos::strain::StrainMode::deformation_gradient;
            }
            if (mode_name == "literal") return lvtos::strain::StrainMode::literal;
            throw std::runtime_error("unknown strain mode: " + mode_name);
        };

        if (gen->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            const auto manifest = lvtos::pipeline::cmd_phantom_gen(config);
            std::cout << "wrote " << manifest.n_cases << " cases (" << manifest.n_train
                      << " train) to " << config.paths.data_dir << "\n";
        } else if (strain_cmd->parsed()) {
            const auto c = lvtos::phantom::PhantomCase::load(case_file);
            lvtos::strain::write_ecc_csv(out_path, ecc_frames_for_case(c, mode()));
            std::cout << "wrote " << out_path << "\n";
        } else if (segmat_cmd->parsed()) {
            const auto c = lvtos::phantom::PhantomCase::load(case_file);
            const auto sm = lvtos::pipeline::strain_matrix_for_case(c, mode());
            lvtos::segmat::write_strain_matrix_csv(out_path, sm);
            std::cout << "wrote " << out_path << "\n";
        } else if (train_seg->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            const auto result = lvtos::pipeline::cmd_train_seg(config);
            std::cout << "segnet: loss " << result.initial_loss << " -> " << result.final_loss
                      << ", val dice " << result.final_val_dice << "\n";
        } else if (train_tos->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            const auto result = lvtos::pipeline::cmd_train_tos(config);
            std::cout << "tosnet: loss " << result.initial_loss << " -> " << result.final_loss
                      << ", val RMSE " << result.final_val_rmse_frames << " frames\n";
        } else if (predict->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            auto sm = lvtos::segmat::read_strain_matrix_csv(sm_path);
            sm = lvtos::segmat::pad_time(sm, config.tos_config.t_max);
            lvtos::nn::LayerGraph net = lvtos::tosnet::build_tosnet(config.tos_config);
            net.load_checkpoint(
                (std::filesystem::path(config.paths.checkpoint_dir) / "tosnet.tosm").string());
            const auto tos = lvtos::tosnet::predict_tos(net, sm, config.tos_config);
            lvtos::segmat::write_tos_csv(out_path, tos);
            std::cout << "wrote " << out_path << "\n";
        } else if (compare->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            const auto report = lvtos::pipeline::cmd_compare(config);
            std::cout << "aggregate RMSE (frames): tosnet "
                      << report.aggregate_rmse_frames_tosnet << ", baseline "
                      << report.aggregate_rmse_frames_baseline << "\n";
        } else if (bullseye->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            if (stack_path.empty()) {
                lvtos::pipeline::cmd_bullseye(config);
            } else {
                const auto stack = lvtos::pipeline::read_stack_json(stack_path);
                const auto map = lvtos::aha::to_aha(stack);
                std::filesystem::create_directories(config.paths.output_dir);
                const auto out =
                    (std::filesystem::path(config.paths.output_dir) / "bullseye.svg").string();
                write_text_file(out, lvtos::aha::render_bullseye(map));
                lvtos::aha::write_aha_csv(
                    (std::filesystem::path(config.paths.output_dir) / "aha_sectors.csv").string(),
                    map);
            }
            std::cout << "wrote bulls-eye outputs to " << config.paths.output_dir << "\n";
        } else if (recon->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            if (stack_path.empty()) {
                lvtos::pipeline::cmd_recon3d(config);
            } else {
                const auto stack = lvtos::pipeline::read_stack_json(stack_path);
                const auto mesh = lvtos::aha::reconstruct_surface(
                    stack, config.viz.rings_per_gap, config.viz.angular_resolution);
                std::filesystem::create_directories(config.paths.output_dir);
                write_text_file(
                    (std::filesystem::path(config.paths.output_dir) / "surface.txt").string(),
                    mesh.to_text());
            }
            std::cout << "wrote surface mesh to " << config.paths.output_dir << "\n";
        } else if (runall->parsed()) {
            const auto config = PipelineConfig::from_json_file(config_path);
            const auto result = lvtos::pipeline::run_all(config);
            std::cout << "summary: " << result.summary_path << "\n";
            for (const std::string& name : result.failed_assertions) {
                std::cerr << "assertion failed: " << name << "\n";
            }
            return result.exit_code;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

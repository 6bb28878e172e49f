// segqa: reference-free segmentation quality estimation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "segqa/segqa.hpp"

namespace {

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("segqa");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("SEGQA_LOG")) {
        const std::string level(env);
        if (level == "error") spdlog::set_level(spdlog::level::err);
        else if (level == "warn") spdlog::set_level(spdlog::level::warn);
        else if (level == "info") spdlog::set_level(spdlog::level::info);
        else if (level == "debug") spdlog::set_level(spdlog::level::debug);
        else spdlog::warn("ignoring unknown SEGQA_LOG value '{}'", level);
    }
}

void add_tree_flags(CLI::App* cmd, segqa::TreeParams& params) {
    cmd->add_option("--max-depth", params.max_depth, "Maximum tree depth")->check(CLI::PositiveNumber);
    cmd->add_option("--min-leaf", params.min_samples_leaf, "Minimum samples per leaf")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Predict per-tissue Dice of a head segmentation without ground truth"};
    app.require_subcommand(1);
    std::size_t jobs = segqa::default_jobs();
    app.add_option("--jobs", jobs, "Worker threads for per-subject work")->check(CLI::PositiveNumber);

    segqa::FeaturesCommand features;
    auto* c_features = app.add_subcommand("features", "Extract the 20 quality features per subject");
    c_features->add_option("--manifest", features.manifest, "Cohort manifest (JSON)")->required();
    c_features->add_option("--out", features.out, "Output feature CSV")->required();
    c_features->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    segqa::EvaluateCommand evaluate;
    std::string svg_dir;
    auto* c_eval = app.add_subcommand("evaluate", "Leave-one-out evaluation over a labelled cohort");
    c_eval->add_option("--manifest", evaluate.manifest, "Cohort manifest (JSON)")->required();
    c_eval->add_option("--out", evaluate.out, "Output report JSON")->required();
    c_eval->add_option("--svg", svg_dir, "Directory for scatter.svg and matrix.svg");
    c_eval->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    add_tree_flags(c_eval, evaluate.params);

    segqa::TrainCommand train;
    auto* c_train = app.add_subcommand("train", "Fit one regression tree per tissue");
    c_train->add_option("--features", train.features, "Feature CSV with Dice columns")->required();
    c_train->add_option("--out", train.out, "Output model JSON")->required();
    add_tree_flags(c_train, train.params);

    segqa::PredictCommand predict;
    auto* c_predict = app.add_subcommand("predict", "Predict per-tissue Dice for a cohort");
    c_predict->add_option("--model", predict.model, "Model JSON from 'train'")->required();
    c_predict->add_option("--manifest", predict.manifest, "Cohort manifest (JSON)")->required();
    c_predict->add_option("--out", predict.out, "Output prediction CSV")->required();
    c_predict->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    segqa::CorrelateCommand correlate;
    std::string correlate_svg;
    auto* c_corr = app.add_subcommand("correlate", "Tissue x feature Pearson correlation matrix");
    c_corr->add_option("--features", correlate.features, "Feature CSV with Dice columns")->required();
    c_corr->add_option("--out", correlate.out, "Output matrix JSON")->required();
    c_corr->add_option("--svg", correlate_svg, "Heat-map SVG file");

    segqa::PhantomCommand phantom;
    auto* c_phantom = app.add_subcommand("phantom", "Generate a synthetic labelled cohort");
    c_phantom->add_option("--n", phantom.n, "Number of subjects (>= 2)")->required();
    c_phantom->add_option("--seed", phantom.seed, "Random seed")->required();
    c_phantom->add_option("--out", phantom.out, "Output directory")->required();
    c_phantom->add_option("--size", phantom.size, "Voxels per axis (default 64)");
    c_phantom->add_flag("--force", phantom.force, "Write into a non-empty directory");
    c_phantom->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(segqa::ExitCode::validation);
    }

    try {
        if (c_features->parsed()) {
            features.jobs = jobs;
            const auto rows = segqa::cmd_features(features);
            spdlog::info("wrote {} feature rows to {}", rows.size(), features.out.string());
        } else if (c_eval->parsed()) {
            evaluate.jobs = jobs;
            if (!svg_dir.empty()) evaluate.svg_dir = svg_dir;
            const auto out = segqa::cmd_evaluate(evaluate);
            spdlog::info("pooled MAE {:.4f} (SD {:.4f}), r = {}", out.report.mean_abs_diff, out.report.sd_abs_diff,
                         out.report.pearson_r ? std::to_string(*out.report.pearson_r) : "undefined");
        } else if (c_train->parsed()) {
            segqa::cmd_train(train);
            spdlog::info("wrote model to {}", train.out.string());
        } else if (c_predict->parsed()) {
            predict.jobs = jobs;
            const auto preds = segqa::cmd_predict(predict);
            spdlog::info("wrote {} predictions to {}", preds.size(), predict.out.string());
        } else if (c_corr->parsed()) {
            if (!correlate_svg.empty()) correlate.svg = correlate_svg;
            segqa::cmd_correlate(correlate);
            spdlog::info("wrote correlation matrix to {}", correlate.out.string());
        } else if (c_phantom->parsed()) {
            phantom.jobs = jobs;
            const auto m = segqa::cmd_phantom(phantom);
            spdlog::info("wrote {} phantom subjects to {}", m.subjects.size(), phantom.out.string());
        }
    } catch (const segqa::Error& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(segqa::exit_code_for(e));
    } catch (const std::filesystem::filesystem_error& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(segqa::ExitCode::io);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return static_cast<int>(segqa::ExitCode::validation);
    }
    return static_cast<int>(segqa::ExitCode::ok);
}

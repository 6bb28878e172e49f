#ifndef SEGQA_COMMANDS_HPP
#define SEGQA_COMMANDS_HPP

// End-to-end workflows behind the `segqa` subcommands. Each throws a
// segqa::Error subclass on failure; the executable maps those to exit codes.

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segqa/error.hpp"
#include "segqa/feature_csv.hpp"
#include "segqa/features.hpp"
#include "segqa/manifest.hpp"
#include "segqa/parallel.hpp"
#include "segqa/phantom.hpp"
#include "segqa/regressor.hpp"
#include "segqa/stats.hpp"
#include "segqa/svg.hpp"

namespace segqa {

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    out << text;
    if (!out) throw IoError("write failure on " + path.string());
}

// Runs process_subject over a manifest. Failures from every subject are
// gathered into one error whose class is IoError if any failure was an I/O
// or parse problem, ValidationError otherwise.
inline std::vector<SubjectFeatures> process_cohort(const CohortManifest& m, std::size_t jobs) {
    std::vector<SubjectFeatures> rows(m.subjects.size());
    const auto errors =
        parallel_for_collect(m.subjects.size(), jobs, [&](std::size_t i) { rows[i] = process_subject(m.subjects[i]); });
    std::string message;
    bool io = false;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            io = io || exit_code_for(e) == ExitCode::io;
            std::string what = e.what();
            if (what.find(m.subjects[i].id) == std::string::npos) what = "subject '" + m.subjects[i].id + "': " + what;
            message += (message.empty() ? "" : "\n") + what;
        }
    }
    if (!message.empty()) {
        if (io) throw IoError(message);
        throw ValidationError(message);
    }
    return rows;
}

inline std::vector<FeatureVector> features_of(const std::vector<SubjectFeatures>& rows) {
    std::vector<FeatureVector> x;
    for (const auto& r : rows) x.push_back(r.features);
    return x;
}

inline std::vector<DiceScores> targets_of(const std::vector<SubjectFeatures>& rows) {
    std::vector<DiceScores> y;
    for (const auto& r : rows) {
        if (!r.targets) throw ValidationError("subject '" + r.id + "' has no Dice targets");
        y.push_back(*r.targets);
    }
    return y;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct FeaturesCommand {
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::size_t jobs = 1;
};

inline std::vector<SubjectFeatures> cmd_features(const FeaturesCommand& cmd) {
    const CohortManifest m = read_manifest(cmd.manifest);
    require_nonempty(m);
    const auto rows = detail::process_cohort(m, cmd.jobs);
    write_feature_csv(rows, cmd.out);
    return rows;
}

struct EvaluateCommand {
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::optional<std::filesystem::path> svg_dir;
    TreeParams params;
    std::size_t jobs = 1;
};

struct EvaluationOutput {
    std::vector<SubjectFeatures> rows;
    LooResult loo;
    EvaluationReport report;
    std::optional<CorrelationMatrix> matrix;
    nlohmann::json document;
};

inline EvaluationOutput cmd_evaluate(const EvaluateCommand& cmd) {
    validate(cmd.params);
    const CohortManifest m = read_manifest(cmd.manifest);
    require_nonempty(m);
    if (m.subjects.size() < 2) throw ValidationError("evaluation needs at least 2 subjects");
    for (const auto& s : m.subjects) {
        if (!s.validated_seg) throw ValidationError("subject '" + s.id + "' has no validated segmentation");
    }
    EvaluationOutput out;
    out.rows = detail::process_cohort(m, cmd.jobs);
    out.loo = loo_evaluate(out.rows, cmd.params, cmd.jobs);
    out.report = summarize(out.loo);
    if (out.rows.size() >= 3) {
        out.matrix = correlation_matrix(detail::features_of(out.rows), detail::targets_of(out.rows));
    }
    out.document = report_to_json(out.report, out.loo.ids, out.matrix);
    detail::write_text_file(cmd.out, out.document.dump(2) + "\n");
    if (cmd.svg_dir) {
        std::error_code ec;
        std::filesystem::create_directories(*cmd.svg_dir, ec);
        if (ec) throw IoError("cannot create " + cmd.svg_dir->string() + ": " + ec.message());
        detail::write_text_file(*cmd.svg_dir / "scatter.svg", svg::scatter(out.report));
        if (out.matrix) detail::write_text_file(*cmd.svg_dir / "matrix.svg", svg::heatmap(*out.matrix));
    }
    return out;
}

struct TrainCommand {
    std::filesystem::path features;
    std::filesystem::path out;
    TreeParams params;
};

inline TissueModelSet cmd_train(const TrainCommand& cmd) {
    const auto rows = read_feature_csv(cmd.features);
    if (rows.empty()) throw ValidationError("feature CSV has no rows");
    const auto models = fit_models(detail::features_of(rows), detail::targets_of(rows), cmd.params);
    detail::write_text_file(cmd.out, models_to_json(models).dump(2) + "\n");
    return models;
}

inline TissueModelSet load_models(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("model is not valid JSON: ") + e.what());
    }
    return models_from_json(j);
}

struct PredictCommand {
    std::filesystem::path model;
    std::filesystem::path manifest;
    std::filesystem::path out;
    std::size_t jobs = 1;
};

inline std::vector<SubjectPrediction> cmd_predict(const PredictCommand& cmd) {
    const TissueModelSet models = load_models(cmd.model);
    CohortManifest m = read_manifest(cmd.manifest);
    require_nonempty(m);
    // Prediction never looks at validated segmentations.
    for (auto& s : m.subjects) s.validated_seg.reset();
    const auto rows = detail::process_cohort(m, cmd.jobs);
    std::vector<SubjectPrediction> preds;
    for (const auto& r : rows) preds.push_back({r.id, models.predict(r.features)});
    write_prediction_csv(preds, cmd.out);
    return preds;
}

struct CorrelateCommand {
    std::filesystem::path features;
    std::filesystem::path out;
    std::optional<std::filesystem::path> svg;
};

inline CorrelationMatrix cmd_correlate(const CorrelateCommand& cmd) {
    const auto rows = read_feature_csv(cmd.features);
    std::vector<SubjectFeatures> labelled;
    for (const auto& r : rows) {
        if (r.targets) labelled.push_back(r);
    }
    if (labelled.size() < 3) throw ValidationError("correlation needs at least 3 rows with Dice values");
    const auto matrix = correlation_matrix(detail::features_of(labelled), detail::targets_of(labelled));
    detail::write_text_file(cmd.out, correlation_document(matrix).dump(2) + "\n");
    if (cmd.svg) detail::write_text_file(*cmd.svg, svg::heatmap(matrix));
    return matrix;
}

struct PhantomCommand {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::filesystem::path out;
    std::size_t size = 64;
    bool force = false;
    std::size_t jobs = 1;
};

inline CohortManifest cmd_phantom(const PhantomCommand& cmd) {
    if (cmd.n < 2) throw ValidationError("--n must be at least 2");
    if (std::filesystem::exists(cmd.out)) {
        if (!std::filesystem::is_directory(cmd.out)) throw IoError(cmd.out.string() + " exists and is not a directory");
        if (!std::filesystem::is_empty(cmd.out) && !cmd.force) {
            throw ValidationError("output directory " + cmd.out.string() + " is not empty (use --force)");
        }
    }
    CohortOptions opt;
    opt.size = cmd.size;
    return generate_cohort(cmd.n, cmd.seed, cmd.out, opt,
                           [&](std::size_t count, auto&& fn) { parallel_for(count, cmd.jobs, fn); });
}

}  // namespace segqa

#endif  // SEGQA_COMMANDS_HPP

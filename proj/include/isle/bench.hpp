#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "isle/arm.hpp"
#include "isle/dataset.hpp"
#include "isle/ensemble.hpp"
#include "isle/postprocess.hpp"
#include "isle/tuner.hpp"

namespace isle {

enum class ModelLabel {
    RF1, RF2, RF_lasso, RF_alasso, RF_enet, RF_aenet,
    MART1, MART2, MART_lasso, MART_alasso, MART_enet, MART_aenet,
    ARM_tree, ARM_lasso, ARM_alasso, ARM_enet, ARM_aenet,
};

inline constexpr std::array<std::string_view, 17> kModelLabels = {
    "RF1", "RF2", "RF_lasso", "RF_alasso", "RF_enet", "RF_aenet",
    "MART1", "MART2", "MART_lasso", "MART_alasso", "MART_enet", "MART_aenet",
    "ARM_tree", "ARM_lasso", "ARM_alasso", "ARM_enet", "ARM_aenet",
};

std::string_view to_string(ModelLabel label);
ModelLabel model_label_from_string(std::string_view name);

/// Per-model overrides, keyed by label. Recognized keys:
///   ensemble: n_trees, max_depth, min_samples_leaf, max_terminal_nodes, eta, nu, m
///   tuned:    rf_m_grid, mart_depth_grid, mart_m_grid, mart_nu_grid
///   post:     n_lambdas, lambda_ratio, alphas, gammas
///   arm:      iterations
using Overrides = std::map<std::string, nlohmann::json>;

struct BenchSettings {
    std::size_t folds = 5;
    std::size_t arm_iterations = 20;
    PostConfig post;
    Overrides overrides;
};

enum class PipelineKind { tuned, isle, post, arm };

/// How a label is composed from the library operations.
struct PipelineSpec {
    ModelLabel label = ModelLabel::RF1;
    PipelineKind kind = PipelineKind::isle;
    EnsembleMode mode = EnsembleMode::rf;  ///< tuned / isle / post
    std::optional<PenaltyKind> penalty;    ///< post
    std::vector<ModelLabel> components;    ///< post: base ensemble; arm: the two mixed models
    EnsembleParams params;                 ///< isle: generation settings (seed set at fit time)
    TuningGrid grid;                       ///< tuned
    PostConfig post;                       ///< post
    std::size_t arm_iterations = 20;       ///< arm
};

/// Throws std::invalid_argument for unknown override keys.
PipelineSpec build_pipeline(ModelLabel label, std::size_t n_rows, std::size_t n_features,
                            const BenchSettings& settings);

struct FittedPipeline {
    Predictor predictor;
    CandidateModel candidate;  ///< refits on other rows at the tuned, frozen settings
    double seconds = 0.0;      ///< own fit time plus that of its components
    std::optional<ArmWeights> arm_weights;
    std::optional<EnsembleParams> params;
    std::optional<FrozenPenalty> penalty;
};

/// Raised when one pipeline fails; carries its label.
class PipelineError : public std::runtime_error {
public:
    PipelineError(std::string label, const std::string& what)
        : std::runtime_error("pipeline " + label + " failed: " + what), label_(std::move(label)) {}
    const std::string& label() const { return label_; }

private:
    std::string label_;
};

/// Fits pipelines on one training set, caching components so that e.g.
/// RF_lasso post-processes the same RF2 ensemble that RF2 reports.
class PipelineRunner {
public:
    PipelineRunner(std::shared_ptr<const Dataset> train, std::uint64_t seed, BenchSettings settings);

    const FittedPipeline& fit(ModelLabel label);
    const Dataset& data() const { return *train_; }

private:
    FittedPipeline fit_uncached(ModelLabel label);

    std::shared_ptr<const Dataset> train_;
    std::uint64_t seed_;
    BenchSettings settings_;
    std::map<ModelLabel, FittedPipeline> cache_;
    std::map<ModelLabel, std::shared_ptr<const Ensemble>> ensembles_;
};

struct BenchConfig {
    std::filesystem::path dataset;
    std::string target;
    bool header = true;
    std::string name;  ///< column title in the report; defaults to the file stem
    double test_fraction = 0.25;
    std::size_t n_repeats = 10;
    std::uint64_t seed = 1;
    std::vector<std::string> roster;
    bool strict_timing = true;
    BenchSettings settings;

    void validate() const;
};

/// Parses a config document; relative dataset paths resolve against base_dir.
BenchConfig bench_config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

struct BenchRow {
    std::string model;
    std::size_t repeat = 0;
    double mse = 0.0;
    double seconds = 0.0;
};

struct BenchSummary {
    std::string model;
    double mean_mse = 0.0;
    double mean_seconds = 0.0;
};

struct BenchReport {
    std::string dataset;
    std::vector<std::string> models;
    std::vector<BenchRow> rows;

    std::vector<BenchSummary> summary() const;
};

/// One repeat on a fixed split; the runner only ever sees the training rows.
std::vector<BenchRow> run_repeat(const Dataset& data, const SplitIndices& split,
                                 std::span<const std::string> roster, std::size_t repeat,
                                 std::uint64_t seed, const BenchSettings& settings);

BenchReport run_bench(const BenchConfig& config);
BenchReport run_bench(const BenchConfig& config, const Dataset& data);

enum class ReportFormat { text, csv };

/// text: one row per model, "mean_mse (mean_seconds)". csv: columns
/// model,repeat,mse,seconds with one row per repeat, then a "mean" row per model.
/// Without seconds the output depends only on the config and data.
std::string emit_report(const BenchReport& report, ReportFormat format, bool with_seconds = true);

/// Inverse of the CSV format, with or without the seconds column (per-repeat
/// rows only; means are recomputed).
BenchReport parse_report_csv(const std::string& csv, const std::string& dataset);

}  // namespace isle

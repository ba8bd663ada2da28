#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "isle/arm.hpp"
#include "isle/ensemble.hpp"
#include "isle/postprocess.hpp"
#include "isle/tree.hpp"

namespace isle {

/// Model files carry {"format_version": kFormatVersion, "type": ...}; loaders
/// reject any other version.
inline constexpr int kFormatVersion = 1;

nlohmann::json to_json(const TreeParams& params);
TreeParams tree_params_from_json(const nlohmann::json& j);

/// {"nodes": [...]} with node 0 the root. Internal nodes hold feature,
/// threshold and child indices; every node holds its training mean and count.
nlohmann::json to_json(const RegressionTree& tree);
RegressionTree tree_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EnsembleParams& params);
EnsembleParams ensemble_params_from_json(const nlohmann::json& j);

/// {"mode", "f0", "shrinkage", "trees": [...]}.
nlohmann::json to_json(const Ensemble& ensemble);
Ensemble ensemble_from_json(const nlohmann::json& j);

/// Adaptive weights of +inf are written as null.
nlohmann::json to_json(const PenaltySpec& spec);
PenaltySpec penalty_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PenalizedFit& fit);
PenalizedFit penalized_fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ArmWeights& weights);
ArmWeights arm_weights_from_json(const nlohmann::json& j);

/// A trained ensemble together with the parameters that produced it.
struct EnsembleModelFile {
    EnsembleParams params;
    Ensemble ensemble;
};

/// A post-processed ensemble (the ensemble is stored inline).
struct PostModelFile {
    EnsembleParams params;
    PostProcessedModel model;
};

/// Weights over member model files, each assumed trained on the same rows.
struct ArmManifest {
    std::vector<std::string> member_paths;
    ArmWeights weights;
};

using ModelFile = std::variant<EnsembleModelFile, PostModelFile, ArmManifest>;

nlohmann::json to_document(const EnsembleModelFile& file);
nlohmann::json to_document(const PostModelFile& file);
nlohmann::json to_document(const ArmManifest& file);
ModelFile model_from_document(const nlohmann::json& doc);

/// Pretty-printed JSON with a trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

ModelFile load_model_file(const std::filesystem::path& path);

}  // namespace isle

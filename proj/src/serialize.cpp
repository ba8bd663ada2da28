#include "isle/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace isle {

using nlohmann::json;

namespace {

json optional_count(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::size_t> count_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::size_t>();
}

json vector_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from(const json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json to_json(const TreeParams& params) {
    return {{"max_depth", optional_count(params.max_depth)},
            {"min_samples_leaf", params.min_samples_leaf},
            {"max_terminal_nodes", optional_count(params.max_terminal_nodes)},
            {"feature_subsample", optional_count(params.feature_subsample)}};
}

TreeParams tree_params_from_json(const json& j) {
    TreeParams params;
    params.max_depth = count_from(j, "max_depth");
    params.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
    params.max_terminal_nodes = count_from(j, "max_terminal_nodes");
    params.feature_subsample = count_from(j, "feature_subsample");
    return params;
}

json to_json(const RegressionTree& tree) {
    json nodes = json::array();
    for (const auto& node : tree.nodes()) {
        json n;
        if (!node.is_leaf()) {
            n["feature"] = node.feature;
            n["threshold"] = node.threshold;
            n["left"] = node.left;
            n["right"] = node.right;
        }
        n["value"] = node.value;
        n["count"] = node.count;
        nodes.push_back(std::move(n));
    }
    return {{"nodes", std::move(nodes)}};
}

RegressionTree tree_from_json(const json& j) {
    std::vector<RegressionTree::Node> nodes;
    for (const auto& n : j.at("nodes")) {
        RegressionTree::Node node;
        if (n.contains("feature")) {
            node.feature = n.at("feature").get<std::int32_t>();
            if (node.feature < 0) throw std::invalid_argument("tree: negative feature index");
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<std::int32_t>();
            node.right = n.at("right").get<std::int32_t>();
        }
        node.value = n.at("value").get<double>();
        node.count = n.at("count").get<std::size_t>();
        nodes.push_back(node);
    }
    return RegressionTree(std::move(nodes));
}

json to_json(const EnsembleParams& params) {
    return {{"n_trees", params.n_trees},
            {"shrinkage", params.shrinkage},
            {"subsample_fraction", params.subsample_fraction},
            {"tree", to_json(params.tree)},
            {"loss", to_string(params.loss)},
            {"mode", to_string(params.mode)},
            {"seed", params.seed}};
}

EnsembleParams ensemble_params_from_json(const json& j) {
    EnsembleParams params;
    params.n_trees = j.at("n_trees").get<std::size_t>();
    params.shrinkage = j.at("shrinkage").get<double>();
    params.subsample_fraction = j.at("subsample_fraction").get<double>();
    params.tree = tree_params_from_json(j.at("tree"));
    params.loss = loss_from_string(j.at("loss").get<std::string>());
    params.mode = mode_from_string(j.at("mode").get<std::string>());
    params.seed = j.at("seed").get<std::uint64_t>();
    return params;
}

json to_json(const Ensemble& ensemble) {
    json trees = json::array();
    for (const auto& tree : ensemble.trees()) trees.push_back(to_json(tree));
    return {{"mode", to_string(ensemble.mode())},
            {"f0", ensemble.f0()},
            {"shrinkage", ensemble.shrinkage()},
            {"trees", std::move(trees)}};
}

Ensemble ensemble_from_json(const json& j) {
    std::vector<RegressionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t));
    return Ensemble(j.at("f0").get<double>(), std::move(trees), j.at("shrinkage").get<double>(),
                    mode_from_string(j.at("mode").get<std::string>()));
}

json to_json(const PenaltySpec& spec) {
    json weights = json::array();
    for (double w : spec.adaptive_weights) weights.push_back(std::isfinite(w) ? json(w) : json(nullptr));
    return {{"kind", to_string(spec.kind)},
            {"lambda", spec.lambda},
            {"alpha", spec.alpha},
            {"gamma", spec.gamma},
            {"adaptive_weights", std::move(weights)}};
}

PenaltySpec penalty_spec_from_json(const json& j) {
    PenaltySpec spec;
    spec.kind = penalty_kind_from_string(j.at("kind").get<std::string>());
    spec.lambda = j.at("lambda").get<double>();
    spec.alpha = j.at("alpha").get<double>();
    spec.gamma = j.at("gamma").get<double>();
    for (const auto& w : j.at("adaptive_weights")) {
        spec.adaptive_weights.push_back(w.is_null() ? std::numeric_limits<double>::infinity()
                                                    : w.get<double>());
    }
    return spec;
}

json to_json(const PenalizedFit& fit) {
    json j = {{"intercept", fit.intercept},
              {"coefficients", vector_json(fit.coefficients)},
              {"standardized_intercept", fit.standardized_intercept},
              {"standardized_coefficients", vector_json(fit.standardized_coefficients)},
              {"penalty", to_json(fit.spec)},
              {"standardization",
               {{"mean", fit.standardization.mean},
                {"scale", fit.standardization.scale},
                {"constant", fit.standardization.constant}}},
              {"objective_value", fit.objective_value},
              {"converged", fit.converged},
              {"polished", fit.polished},
              {"degenerate", fit.degenerate},
              {"iterations", fit.iterations},
              {"n_train", fit.n_train},
              {"nonzero", fit.nonzero()}};
    if (fit.pilot) {
        j["pilot"] = {{"penalty", to_json(fit.pilot->spec)},
                      {"coefficients", vector_json(fit.pilot->coefficients)}};
    } else {
        j["pilot"] = nullptr;
    }
    return j;
}

PenalizedFit penalized_fit_from_json(const json& j) {
    PenalizedFit fit;
    fit.intercept = j.at("intercept").get<double>();
    fit.coefficients = vector_from(j.at("coefficients"));
    fit.standardized_intercept = j.at("standardized_intercept").get<double>();
    fit.standardized_coefficients = vector_from(j.at("standardized_coefficients"));
    fit.spec = penalty_spec_from_json(j.at("penalty"));
    const auto& st = j.at("standardization");
    fit.standardization.mean = st.at("mean").get<std::vector<double>>();
    fit.standardization.scale = st.at("scale").get<std::vector<double>>();
    fit.standardization.constant = st.at("constant").get<std::vector<bool>>();
    fit.objective_value = j.at("objective_value").get<double>();
    fit.converged = j.at("converged").get<bool>();
    fit.polished = j.at("polished").get<bool>();
    fit.degenerate = j.at("degenerate").get<bool>();
    fit.iterations = j.at("iterations").get<std::size_t>();
    fit.n_train = j.at("n_train").get<std::size_t>();
    if (j.contains("pilot") && !j.at("pilot").is_null()) {
        fit.pilot = PilotFit{penalty_spec_from_json(j.at("pilot").at("penalty")),
                             vector_from(j.at("pilot").at("coefficients"))};
    }
    return fit;
}

json to_json(const ArmWeights& weights) {
    json shares = json::array();
    for (Eigen::Index t = 0; t < weights.per_iteration_shares.rows(); ++t) {
        const Eigen::VectorXd row = weights.per_iteration_shares.row(t).transpose();
        shares.push_back(vector_json(row));
    }
    return {{"labels", weights.labels},
            {"weights", weights.weights},
            {"per_iteration_shares", std::move(shares)}};
}

ArmWeights arm_weights_from_json(const json& j) {
    ArmWeights weights;
    weights.labels = j.at("labels").get<std::vector<std::string>>();
    weights.weights = j.at("weights").get<std::vector<double>>();
    const auto& shares = j.at("per_iteration_shares");
    weights.per_iteration_shares.resize(static_cast<Eigen::Index>(shares.size()),
                                        static_cast<Eigen::Index>(weights.weights.size()));
    for (std::size_t t = 0; t < shares.size(); ++t) {
        const auto row = vector_from(shares[t]);
        if (row.size() != weights.per_iteration_shares.cols()) {
            throw std::invalid_argument("arm weights: share row length mismatch");
        }
        weights.per_iteration_shares.row(static_cast<Eigen::Index>(t)) = row.transpose();
    }
    if (weights.labels.size() != weights.weights.size()) {
        throw std::invalid_argument("arm weights: label/weight count mismatch");
    }
    return weights;
}

json to_document(const EnsembleModelFile& file) {
    return {{"format_version", kFormatVersion},
            {"type", "ensemble"},
            {"params", to_json(file.params)},
            {"ensemble", to_json(file.ensemble)}};
}

json to_document(const PostModelFile& file) {
    json cv = json::array();
    for (const auto& row : file.model.cv_table) {
        cv.push_back({{"kind", to_string(row.kind)},
                      {"lambda", row.lambda},
                      {"alpha", row.alpha},
                      {"gamma", row.gamma},
                      {"mean_mse", row.mean_mse},
                      {"sd_mse", row.sd_mse}});
    }
    return {{"format_version", kFormatVersion},
            {"type", "post"},
            {"params", to_json(file.params)},
            {"ensemble", to_json(file.model.ensemble())},
            {"fit", to_json(file.model.fit())},
            {"cv_mse", file.model.cv_mse},
            {"cv_table", std::move(cv)}};
}

json to_document(const ArmManifest& file) {
    return {{"format_version", kFormatVersion},
            {"type", "arm"},
            {"members", file.member_paths},
            {"weights", to_json(file.weights)}};
}

ModelFile model_from_document(const json& doc) {
    if (!doc.is_object() || !doc.contains("format_version")) {
        throw std::invalid_argument("model file has no format_version");
    }
    const int version = doc.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw std::invalid_argument("unsupported model format_version " + std::to_string(version) +
                                    " (expected " + std::to_string(kFormatVersion) + ")");
    }
    const auto type = doc.at("type").get<std::string>();
    if (type == "ensemble") {
        return EnsembleModelFile{ensemble_params_from_json(doc.at("params")),
                                 ensemble_from_json(doc.at("ensemble"))};
    }
    if (type == "post") {
        auto ensemble = std::make_shared<const Ensemble>(ensemble_from_json(doc.at("ensemble")));
        PostProcessedModel model(std::move(ensemble), penalized_fit_from_json(doc.at("fit")));
        model.cv_mse = doc.value("cv_mse", 0.0);
        if (doc.contains("cv_table")) {
            for (const auto& row : doc.at("cv_table")) {
                model.cv_table.push_back({penalty_kind_from_string(row.at("kind").get<std::string>()),
                                          row.at("lambda").get<double>(), row.at("alpha").get<double>(),
                                          row.at("gamma").get<double>(), row.at("mean_mse").get<double>(),
                                          row.at("sd_mse").get<double>()});
            }
        }
        return PostModelFile{ensemble_params_from_json(doc.at("params")), std::move(model)};
    }
    if (type == "arm") {
        return ArmManifest{doc.at("members").get<std::vector<std::string>>(),
                           arm_weights_from_json(doc.at("weights"))};
    }
    throw std::invalid_argument("unknown model file type '" + type + "'");
}

void write_json(const json& doc, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << doc.dump(1) << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return json::parse(in);
}

ModelFile load_model_file(const std::filesystem::path& path) {
    return model_from_document(read_json(path));
}

}  // namespace isle

#include "cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isle/arm.hpp"
#include "isle/bench.hpp"
#include "isle/dataset.hpp"
#include "isle/ensemble.hpp"
#include "isle/postprocess.hpp"
#include "isle/serialize.hpp"
#include "isle/tuner.hpp"

namespace isle::cli {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

/// Bad flag values or configs detected after parsing.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataFlags {
    std::string path;
    std::string target;
    bool no_header = false;

    void add(CLI::App& cmd) {
        cmd.add_option("--data", path, "CSV file")->required()->check(CLI::ExistingFile);
        cmd.add_option("--target", target, "Response column name (or 0-based index with --no-header)")
            ->required();
        cmd.add_flag("--no-header", no_header, "The CSV has no header row");
    }
    Dataset load() const { return load_csv(path, target, !no_header); }
};

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double elapsed(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::size_t required_features(const Ensemble& ensemble) {
    std::size_t p = 0;
    for (const auto& tree : ensemble.trees()) {
        for (const auto& node : tree.nodes()) {
            if (node.feature >= 0) p = std::max(p, static_cast<std::size_t>(node.feature) + 1);
        }
    }
    return p;
}

void check_features(const Ensemble& ensemble, const Dataset& data) {
    const auto need = required_features(ensemble);
    if (need > data.n_features()) {
        throw std::runtime_error("model splits on feature " + std::to_string(need - 1) + " but the data has " +
                                 std::to_string(data.n_features()) + " feature columns");
    }
}

double training_mse(const Predictor& predict, const Dataset& data) {
    double sse = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        const double r = data.response(i) - predict(data.row(i));
        sse += r * r;
    }
    return sse / static_cast<double>(data.n_rows());
}

// ---- train -----------------------------------------------------------------

struct TrainFlags {
    DataFlags data;
    std::string model = "rf";
    std::string mode = "isle";
    std::optional<std::size_t> trees, depth, leaf, m;
    std::optional<double> eta, nu;
    std::size_t folds = 5;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_train(const TrainFlags& f, std::ostream& out) {
    const auto data = f.data.load();
    const auto rows = all_rows(data.n_rows());
    const auto mode = mode_from_string(f.model);
    const auto start = Clock::now();
    EnsembleParams params;
    if (f.mode == "tuned") {
        if (f.trees || f.depth || f.leaf || f.m || f.eta || f.nu) {
            throw UsageError("--mode tuned selects settings by cross-validation; ensemble flags apply to --mode isle");
        }
        params = tune(data, rows, mode, TuningGrid::defaults(data.n_features()), f.folds, f.seed).best_params;
    } else {
        params = mode == EnsembleMode::rf ? EnsembleParams::rf_isle(data.n_rows(), data.n_features())
                                          : EnsembleParams::mart_isle(data.n_rows());
        if (f.trees) params.n_trees = *f.trees;
        if (f.depth) params.tree.max_depth = *f.depth == 0 ? std::nullopt : std::optional<std::size_t>(*f.depth);
        if (f.leaf) params.tree.min_samples_leaf = *f.leaf;
        if (f.m) params.tree.feature_subsample = *f.m;
        if (f.eta) params.subsample_fraction = *f.eta;
        if (f.nu) params.shrinkage = *f.nu;
        try {
            params.validate(data.n_features());
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    params.seed = f.seed;
    auto ensemble = generate_ensemble(data, rows, params);
    const double seconds = elapsed(start);
    const auto mse = training_mse([&](std::span<const double> x) { return ensemble.predict(x); }, data);
    write_json(to_document(EnsembleModelFile{params, ensemble}), f.out);
    out << "model=" << f.model << " mode=" << f.mode << " trees=" << params.n_trees
        << " train_mse=" << num(mse) << " seconds=" << num(seconds) << " out=" << f.out << '\n';
    return kExitOk;
}

// ---- predict ---------------------------------------------------------------

struct PredictFlags {
    DataFlags data;
    std::string model;
    std::string out;
};

Predictor load_predictor(const fs::path& path, const Dataset& data) {
    auto file = load_model_file(path);
    if (auto* e = std::get_if<EnsembleModelFile>(&file)) {
        check_features(e->ensemble, data);
        auto ensemble = std::make_shared<const Ensemble>(std::move(e->ensemble));
        return [ensemble](std::span<const double> x) { return ensemble->predict(x); };
    }
    if (auto* p = std::get_if<PostModelFile>(&file)) {
        check_features(p->model.ensemble(), data);
        auto model = std::make_shared<const PostProcessedModel>(std::move(p->model));
        return [model](std::span<const double> x) { return model->predict(x); };
    }
    auto& manifest = std::get<ArmManifest>(file);
    std::vector<Predictor> members;
    for (const auto& member : manifest.member_paths) {
        fs::path member_path(member);
        if (member_path.is_relative()) member_path = path.parent_path() / member_path;
        members.push_back(load_predictor(member_path, data));
    }
    return [members, weights = manifest.weights](std::span<const double> x) {
        return arm_predict(members, weights, x);
    };
}

int cmd_predict(const PredictFlags& f, std::ostream& out) {
    const auto data = f.data.load();
    const auto predict = load_predictor(f.model, data);
    double sse = 0.0;
    std::ostringstream csv;
    csv.precision(17);
    csv << "prediction\n";
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        const double yhat = predict(data.row(i));
        const double r = data.response(i) - yhat;
        sse += r * r;
        csv << yhat << '\n';
    }
    if (!f.out.empty()) {
        std::ofstream file(f.out, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write " + f.out);
        file << csv.str();
    }
    out << "rows=" << data.n_rows() << " mse=" << num(sse / static_cast<double>(data.n_rows()));
    if (!f.out.empty()) out << " out=" << f.out;
    out << '\n';
    return kExitOk;
}

// ---- post ------------------------------------------------------------------

struct PostFlags {
    DataFlags data;
    std::string model;
    std::string penalty = "lasso";
    std::size_t folds = 5;
    std::size_t n_lambdas = 100;
    double lambda_ratio = 1e-3;
    std::uint64_t seed = 1;
    std::string out;
};

int cmd_post(const PostFlags& f, std::ostream& out) {
    const auto data = f.data.load();
    auto file = load_model_file(f.model);
    auto* source = std::get_if<EnsembleModelFile>(&file);
    if (!source) throw UsageError("--model must be an ensemble file written by 'train'");
    check_features(source->ensemble, data);
    PenaltyKind kind;
    try {
        kind = penalty_kind_from_string(f.penalty);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    PostConfig config;
    config.folds = f.folds;
    config.grid.n_lambdas = f.n_lambdas;
    config.grid.lambda_ratio = f.lambda_ratio;
    auto ensemble = std::make_shared<const Ensemble>(std::move(source->ensemble));
    const auto start = Clock::now();
    auto model = post_process(ensemble, data, all_rows(data.n_rows()), kind, config, f.seed);
    const double seconds = elapsed(start);
    const auto& fit = model.fit();
    write_json(to_document(PostModelFile{source->params, model}), f.out);
    out << "penalty=" << short_name(kind) << " lambda=" << num(fit.spec.lambda) << " alpha=" << num(fit.spec.alpha)
        << " gamma=" << num(fit.spec.gamma) << " nonzero=" << fit.nonzero() << " trees=" << ensemble->size()
        << " cv_mse=" << num(model.cv_mse);
    if (fit.pilot) {
        out << " pilot=" << short_name(fit.pilot->spec.kind) << " pilot_lambda=" << num(fit.pilot->spec.lambda)
            << " pilot_alpha=" << num(fit.pilot->spec.alpha);
    }
    out << " seconds=" << num(seconds) << " out=" << f.out << '\n';
    return kExitOk;
}

// ---- arm -------------------------------------------------------------------

struct ArmFlags {
    DataFlags data;
    std::vector<std::string> models;
    std::size_t iters = 20;
    std::uint64_t seed = 1;
    std::string out;
    std::string report;
};

CandidateModel candidate_from_file(const std::string& path, const Dataset& data) {
    auto file = load_model_file(path);
    CandidateModel c;
    c.label = fs::path(path).stem().string();
    if (auto* e = std::get_if<EnsembleModelFile>(&file)) {
        check_features(e->ensemble, data);
        const auto params = e->params;
        c.hyperparameters = to_json(params).dump();
        c.fit = [params](const Dataset& d, std::span<const std::size_t> rows, std::uint64_t seed) -> Predictor {
            auto p = params;
            p.seed = seed;
            auto ensemble = std::make_shared<const Ensemble>(generate_ensemble(d, rows, p));
            return [ensemble](std::span<const double> x) { return ensemble->predict(x); };
        };
        return c;
    }
    if (auto* p = std::get_if<PostModelFile>(&file)) {
        check_features(p->model.ensemble(), data);
        const auto params = p->params;
        const auto frozen = freeze(p->model.fit());
        c.hyperparameters = to_json(params).dump() + " " + to_json(p->model.fit().spec).dump();
        c.fit = [params, frozen](const Dataset& d, std::span<const std::size_t> rows,
                                 std::uint64_t seed) -> Predictor {
            auto q = params;
            q.seed = seed;
            auto ensemble = std::make_shared<const Ensemble>(generate_ensemble(d, rows, q));
            auto model = std::make_shared<const PostProcessedModel>(refit_frozen(ensemble, d, rows, frozen));
            return [model](std::span<const double> x) { return model->predict(x); };
        };
        return c;
    }
    throw UsageError(path + ": ARM members must be ensemble or post-processed model files");
}

int cmd_arm(const ArmFlags& f, std::ostream& out) {
    const auto data = f.data.load();
    std::vector<CandidateModel> candidates;
    for (const auto& path : f.models) candidates.push_back(candidate_from_file(path, data));
    ArmConfig config;
    config.n_outer = f.iters;
    const auto start = Clock::now();
    const auto weights = arm_weights(candidates, data, all_rows(data.n_rows()), config, f.seed);
    const double seconds = elapsed(start);

    ArmManifest manifest;
    const auto out_dir = fs::absolute(f.out).parent_path();
    for (const auto& path : f.models) {
        manifest.member_paths.push_back(fs::absolute(path).lexically_relative(out_dir).generic_string());
    }
    manifest.weights = weights;
    write_json(to_document(manifest), f.out);
    if (!f.report.empty()) {
        std::ofstream report(f.report, std::ios::binary);
        if (!report) throw std::runtime_error("cannot write " + f.report);
        write_arm_weights_csv(weights, report);
    }
    for (std::size_t j = 0; j < weights.labels.size(); ++j) {
        out << "model=" << weights.labels[j] << " weight=" << num(weights.weights[j]) << '\n';
    }
    out << "iters=" << f.iters << " seconds=" << num(seconds) << " out=" << f.out << '\n';
    return kExitOk;
}

// ---- bench -----------------------------------------------------------------

struct BenchFlags {
    std::string config;
    std::string format = "text";
    std::string out;
    std::string timing_out;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
    std::ifstream in(f.config);
    if (!in) throw std::runtime_error("cannot read " + f.config);
    BenchConfig config;
    try {
        const auto doc = nlohmann::json::parse(in);
        config = bench_config_from_json(doc, fs::path(f.config).parent_path());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(f.config + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(f.config + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw UsageError(f.config + ": " + e.what());
    }
    const auto report = run_bench(config);
    const auto format = f.format == "csv" ? ReportFormat::csv : ReportFormat::text;
    out << emit_report(report, format);
    auto write = [](const std::string& path, const std::string& text) {
        std::ofstream file(path, std::ios::binary);
        if (!file) throw std::runtime_error("cannot write " + path);
        file << text;
    };
    if (!f.out.empty()) write(f.out, emit_report(report, ReportFormat::csv, false));
    if (!f.timing_out.empty()) write(f.timing_out, emit_report(report, ReportFormat::csv, true));
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"ISLE: importance-sampled ensembles with penalized post-processing"};
    app.name("isle");
    app.require_subcommand(1);

    TrainFlags train;
    auto* train_cmd = app.add_subcommand("train", "Generate a tree ensemble and write it as JSON");
    train.data.add(*train_cmd);
    train_cmd->add_option("--model", train.model, "Ensemble family")->check(CLI::IsMember({"rf", "mart"}))
        ->capture_default_str();
    train_cmd->add_option("--mode", train.mode, "isle: fixed generation settings; tuned: CV grid search")
        ->check(CLI::IsMember({"isle", "tuned"}))->capture_default_str();
    train_cmd->add_option("--trees", train.trees, "Number of trees")->check(CLI::PositiveNumber);
    train_cmd->add_option("--depth", train.depth, "Maximum tree depth (0 = unlimited)");
    train_cmd->add_option("--leaf", train.leaf, "Minimum rows per leaf")->check(CLI::PositiveNumber);
    train_cmd->add_option("--eta", train.eta, "Subsample fraction per tree")->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--nu", train.nu, "Shrinkage (mart)")->check(CLI::Range(0.0, 1.0));
    train_cmd->add_option("--m", train.m, "Features drawn per split")->check(CLI::PositiveNumber);
    train_cmd->add_option("--folds", train.folds, "CV folds for --mode tuned")->check(CLI::Range(2, 1000))
        ->capture_default_str();
    train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
    train_cmd->add_option("--out", train.out, "Output model file")->required();

    PredictFlags predict;
    auto* predict_cmd = app.add_subcommand("predict", "Predict with any model file; reports MSE");
    predict.data.add(*predict_cmd);
    predict_cmd->add_option("--model", predict.model, "Model file")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--out", predict.out, "Write predictions as CSV");

    PostFlags post;
    auto* post_cmd = app.add_subcommand("post", "Penalized post-processing of a trained ensemble");
    post.data.add(*post_cmd);
    post_cmd->add_option("--model", post.model, "Ensemble file from 'train'")->required()
        ->check(CLI::ExistingFile);
    post_cmd->add_option("--penalty", post.penalty, "lasso, alasso, enet or aenet")
        ->check(CLI::IsMember({"lasso", "alasso", "enet", "aenet"}))->capture_default_str();
    post_cmd->add_option("--folds", post.folds, "CV folds")->check(CLI::Range(2, 1000))->capture_default_str();
    post_cmd->add_option("--n-lambdas", post.n_lambdas, "Lambda grid size")->check(CLI::PositiveNumber)
        ->capture_default_str();
    post_cmd->add_option("--lambda-ratio", post.lambda_ratio, "Smallest lambda as a fraction of the largest")
        ->check(CLI::Range(1e-12, 1.0))->capture_default_str();
    post_cmd->add_option("--seed", post.seed, "Random seed for the folds")->capture_default_str();
    post_cmd->add_option("--out", post.out, "Output model file")->required();

    ArmFlags arm;
    auto* arm_cmd = app.add_subcommand("arm", "Mix model files by adaptive regression by mixing");
    arm.data.add(*arm_cmd);
    arm_cmd->add_option("--models", arm.models, "Comma-separated model files")->required()->delimiter(',')
        ->check(CLI::ExistingFile);
    arm_cmd->add_option("--iters", arm.iters, "Random three-way splits")->check(CLI::PositiveNumber)
        ->capture_default_str();
    arm_cmd->add_option("--seed", arm.seed, "Random seed")->capture_default_str();
    arm_cmd->add_option("--out", arm.out, "Output manifest")->required();
    arm_cmd->add_option("--report", arm.report, "Write per-split weight shares as CSV");

    BenchFlags bench;
    auto* bench_cmd = app.add_subcommand("bench", "Run the benchmark described by a JSON config");
    bench_cmd->add_option("--config", bench.config, "Benchmark config")->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--format", bench.format, "Report on standard output: text or csv")
        ->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "Per-repeat MSE as CSV (no timings)");
    bench_cmd->add_option("--timing-out", bench.timing_out, "Per-repeat MSE and seconds as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train_cmd) return cmd_train(train, out);
        if (*predict_cmd) return cmd_predict(predict, out);
        if (*post_cmd) return cmd_post(post, out);
        if (*arm_cmd) return cmd_arm(arm, out);
        if (*bench_cmd) return cmd_bench(bench, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace isle::cli

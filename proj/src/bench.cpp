#include "isle/bench.hpp"
#include "isle/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace isle {

using nlohmann::json;

std::string_view to_string(ModelLabel label) {
    return kModelLabels[static_cast<std::size_t>(label)];
}

ModelLabel model_label_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kModelLabels.size(); ++i) {
        if (kModelLabels[i] == name) return static_cast<ModelLabel>(i);
    }
    throw std::invalid_argument("unknown model label '" + std::string(name) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::set<std::string> kEnsembleKeys = {"n_trees", "max_depth", "min_samples_leaf",
                                             "max_terminal_nodes", "eta", "nu", "m"};
const std::set<std::string> kTunedKeys = {"rf_m_grid", "mart_depth_grid", "mart_m_grid", "mart_nu_grid"};
const std::set<std::string> kPostKeys = {"n_lambdas", "lambda_ratio", "alphas", "gammas"};
const std::set<std::string> kArmKeys = {"iterations"};

void check_keys(const json& overrides, const std::set<std::string>& allowed, ModelLabel label) {
    if (!overrides.is_object()) {
        throw std::invalid_argument("overrides for " + std::string(to_string(label)) + " must be an object");
    }
    for (const auto& [key, value] : overrides.items()) {
        if (!allowed.count(key)) {
            throw std::invalid_argument("override '" + key + "' does not apply to " +
                                        std::string(to_string(label)));
        }
    }
}

void apply_ensemble_overrides(EnsembleParams& params, const json& o) {
    if (o.contains("n_trees")) params.n_trees = o.at("n_trees").get<std::size_t>();
    if (o.contains("max_depth")) {
        params.tree.max_depth = o.at("max_depth").is_null()
                                    ? std::nullopt
                                    : std::optional<std::size_t>(o.at("max_depth").get<std::size_t>());
    }
    if (o.contains("min_samples_leaf")) params.tree.min_samples_leaf = o.at("min_samples_leaf").get<std::size_t>();
    if (o.contains("max_terminal_nodes")) {
        params.tree.max_terminal_nodes =
            o.at("max_terminal_nodes").is_null()
                ? std::nullopt
                : std::optional<std::size_t>(o.at("max_terminal_nodes").get<std::size_t>());
    }
    if (o.contains("eta")) params.subsample_fraction = o.at("eta").get<double>();
    if (o.contains("nu")) params.shrinkage = o.at("nu").get<double>();
    if (o.contains("m")) params.tree.feature_subsample = o.at("m").get<std::size_t>();
}

void apply_post_overrides(PostConfig& post, const json& o) {
    if (o.contains("n_lambdas")) post.grid.n_lambdas = o.at("n_lambdas").get<std::size_t>();
    if (o.contains("lambda_ratio")) post.grid.lambda_ratio = o.at("lambda_ratio").get<double>();
    if (o.contains("alphas")) post.grid.alphas = o.at("alphas").get<std::vector<double>>();
    if (o.contains("gammas")) post.grid.gammas = o.at("gammas").get<std::vector<double>>();
}

EnsembleMode family(ModelLabel label) {
    return static_cast<int>(label) <= static_cast<int>(ModelLabel::RF_aenet) ? EnsembleMode::rf
                                                                             : EnsembleMode::mart;
}

PenaltyKind penalty_of(ModelLabel label) {
    switch (label) {
        case ModelLabel::RF_lasso: case ModelLabel::MART_lasso: case ModelLabel::ARM_lasso:
            return PenaltyKind::lasso;
        case ModelLabel::RF_alasso: case ModelLabel::MART_alasso: case ModelLabel::ARM_alasso:
            return PenaltyKind::adaptive_lasso;
        case ModelLabel::RF_enet: case ModelLabel::MART_enet: case ModelLabel::ARM_enet:
            return PenaltyKind::elastic_net;
        case ModelLabel::RF_aenet: case ModelLabel::MART_aenet: case ModelLabel::ARM_aenet:
            return PenaltyKind::adaptive_elastic_net;
        default: throw std::logic_error("label has no penalty");
    }
}

ModelLabel post_label(EnsembleMode mode, PenaltyKind kind) {
    const int base = mode == EnsembleMode::rf ? static_cast<int>(ModelLabel::RF_lasso)
                                              : static_cast<int>(ModelLabel::MART_lasso);
    return static_cast<ModelLabel>(base + static_cast<int>(kind));
}

}  // namespace

PipelineSpec build_pipeline(ModelLabel label, std::size_t n_rows, std::size_t n_features,
                            const BenchSettings& settings) {
    PipelineSpec spec;
    spec.label = label;
    const auto it = settings.overrides.find(std::string(to_string(label)));
    const json overrides = it == settings.overrides.end() ? json::object() : it->second;

    switch (label) {
        case ModelLabel::RF1:
        case ModelLabel::MART1: {
            check_keys(overrides, kTunedKeys, label);
            spec.kind = PipelineKind::tuned;
            spec.mode = family(label);
            spec.grid = TuningGrid::defaults(n_features);
            if (overrides.contains("rf_m_grid")) spec.grid.rf_m_grid = overrides.at("rf_m_grid").get<std::vector<std::size_t>>();
            if (overrides.contains("mart_depth_grid")) spec.grid.mart_depth_grid = overrides.at("mart_depth_grid").get<std::vector<std::size_t>>();
            if (overrides.contains("mart_m_grid")) spec.grid.mart_m_grid = overrides.at("mart_m_grid").get<std::vector<std::size_t>>();
            if (overrides.contains("mart_nu_grid")) spec.grid.mart_nu_grid = overrides.at("mart_nu_grid").get<std::vector<double>>();
            break;
        }
        case ModelLabel::RF2:
        case ModelLabel::MART2: {
            check_keys(overrides, kEnsembleKeys, label);
            spec.kind = PipelineKind::isle;
            spec.mode = family(label);
            spec.params = spec.mode == EnsembleMode::rf ? EnsembleParams::rf_isle(n_rows, n_features)
                                                        : EnsembleParams::mart_isle(n_rows);
            apply_ensemble_overrides(spec.params, overrides);
            spec.params.validate(n_features);
            break;
        }
        case ModelLabel::ARM_tree:
            check_keys(overrides, kArmKeys, label);
            spec.kind = PipelineKind::arm;
            spec.components = {ModelLabel::RF1, ModelLabel::MART1};
            spec.arm_iterations = overrides.value("iterations", settings.arm_iterations);
            break;
        case ModelLabel::ARM_lasso:
        case ModelLabel::ARM_alasso:
        case ModelLabel::ARM_enet:
        case ModelLabel::ARM_aenet: {
            check_keys(overrides, kArmKeys, label);
            spec.kind = PipelineKind::arm;
            const auto kind = penalty_of(label);
            spec.penalty = kind;
            spec.components = {post_label(EnsembleMode::rf, kind), post_label(EnsembleMode::mart, kind)};
            spec.arm_iterations = overrides.value("iterations", settings.arm_iterations);
            break;
        }
        default: {
            check_keys(overrides, kPostKeys, label);
            spec.kind = PipelineKind::post;
            spec.mode = family(label);
            spec.penalty = penalty_of(label);
            spec.components = {spec.mode == EnsembleMode::rf ? ModelLabel::RF2 : ModelLabel::MART2};
            spec.post = settings.post;
            spec.post.folds = settings.folds;
            apply_post_overrides(spec.post, overrides);
            break;
        }
    }
    if (spec.kind == PipelineKind::arm && spec.arm_iterations < 1) {
        throw std::invalid_argument("ARM iterations must be >= 1");
    }
    return spec;
}

PipelineRunner::PipelineRunner(std::shared_ptr<const Dataset> train, std::uint64_t seed,
                               BenchSettings settings)
    : train_(std::move(train)), seed_(seed), settings_(std::move(settings)) {
    if (!train_) throw std::invalid_argument("PipelineRunner: null dataset");
}

const FittedPipeline& PipelineRunner::fit(ModelLabel label) {
    if (auto it = cache_.find(label); it != cache_.end()) return it->second;
    try {
        auto fitted = fit_uncached(label);
        return cache_.emplace(label, std::move(fitted)).first->second;
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(std::string(to_string(label)), e.what());
    }
}

namespace {

Predictor ensemble_predictor(std::shared_ptr<const Ensemble> ensemble) {
    return [ensemble](std::span<const double> x) { return ensemble->predict(x); };
}

FitProcedure ensemble_refit(EnsembleParams params) {
    return [params](const Dataset& data, std::span<const std::size_t> rows, std::uint64_t seed) {
        auto p = params;
        p.seed = seed;
        return ensemble_predictor(std::make_shared<const Ensemble>(generate_ensemble(data, rows, p)));
    };
}

std::string describe(const EnsembleParams& params) { return to_json(params).dump(); }

}  // namespace

FittedPipeline PipelineRunner::fit_uncached(ModelLabel label) {
    const auto& data = *train_;
    const auto rows = all_rows(data.n_rows());
    const auto spec = build_pipeline(label, data.n_rows(), data.n_features(), settings_);
    const auto label_seed = mix_seed(seed_, static_cast<std::uint64_t>(label));
    FittedPipeline out;
    out.candidate.label = std::string(to_string(label));

    switch (spec.kind) {
        case PipelineKind::tuned:
        case PipelineKind::isle: {
            const auto start = Clock::now();
            EnsembleParams params = spec.params;
            if (spec.kind == PipelineKind::tuned) {
                params = tune(data, rows, spec.mode, spec.grid, settings_.folds, label_seed).best_params;
            }
            params.seed = label_seed;
            auto ensemble = std::make_shared<const Ensemble>(generate_ensemble(data, rows, params));
            out.seconds = seconds_since(start);
            ensembles_[label] = ensemble;
            out.predictor = ensemble_predictor(ensemble);
            out.candidate.fit = ensemble_refit(params);
            out.candidate.hyperparameters = describe(params);
            out.params = params;
            return out;
        }
        case PipelineKind::post: {
            const auto base_label = spec.components.front();
            const auto& base = fit(base_label);
            auto ensemble = ensembles_.at(base_label);
            const auto start = Clock::now();
            auto model = std::make_shared<const PostProcessedModel>(
                post_process(ensemble, data, rows, *spec.penalty, spec.post, label_seed));
            out.seconds = base.seconds + seconds_since(start);
            out.predictor = [model](std::span<const double> x) { return model->predict(x); };
            const auto frozen = freeze(model->fit());
            const auto base_params = *base.params;
            const auto cd = spec.post.cd;
            out.candidate.fit = [base_params, frozen, cd](const Dataset& d, std::span<const std::size_t> r,
                                                          std::uint64_t seed) -> Predictor {
                auto p = base_params;
                p.seed = seed;
                auto e = std::make_shared<const Ensemble>(generate_ensemble(d, r, p));
                auto m = std::make_shared<const PostProcessedModel>(refit_frozen(e, d, r, frozen, cd));
                return [m](std::span<const double> x) { return m->predict(x); };
            };
            out.candidate.hyperparameters = describe(base_params) + " " + to_json(model->fit().spec).dump();
            out.params = base_params;
            out.penalty = frozen;
            return out;
        }
        case PipelineKind::arm: {
            const auto& first = fit(spec.components[0]);
            const auto& second = fit(spec.components[1]);
            const std::array<CandidateModel, 2> candidates{first.candidate, second.candidate};
            ArmConfig config;
            config.n_outer = spec.arm_iterations;
            const auto start = Clock::now();
            auto weights = arm_weights(candidates, data, rows, config, label_seed);
            out.seconds = first.seconds + second.seconds + seconds_since(start);
            const std::vector<Predictor> predictors{first.predictor, second.predictor};
            out.predictor = [predictors, weights](std::span<const double> x) {
                return arm_predict(predictors, weights, x);
            };
            out.candidate.fit = [candidates, config](const Dataset& d, std::span<const std::size_t> r,
                                                     std::uint64_t seed) -> Predictor {
                auto w = arm_weights(candidates, d, r, config, seed);
                std::vector<Predictor> refit;
                for (const auto& c : candidates) refit.push_back(c.fit(d, r, seed));
                return [refit, w](std::span<const double> x) { return arm_predict(refit, w, x); };
            };
            out.arm_weights = std::move(weights);
            return out;
        }
    }
    throw std::logic_error("unhandled pipeline kind");
}

void BenchConfig::validate() const {
    if (roster.empty()) throw std::invalid_argument("bench config: roster is empty");
    for (const auto& label : roster) model_label_from_string(label);
    if (n_repeats < 1) throw std::invalid_argument("bench config: n_repeats must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw std::invalid_argument("bench config: test_fraction must lie in (0, 1)");
    }
    if (settings.folds < 2) throw std::invalid_argument("bench config: folds must be >= 2");
    if (settings.arm_iterations < 1) throw std::invalid_argument("bench config: arm_iterations must be >= 1");
    for (const auto& [label, value] : settings.overrides) {
        model_label_from_string(label);
        if (!value.is_object()) throw std::invalid_argument("bench config: overrides for " + label + " must be an object");
    }
}

BenchConfig bench_config_from_json(const json& doc, const std::filesystem::path& base_dir) {
    static const std::set<std::string> known = {"dataset", "target", "header", "name", "test_fraction",
                                                "n_repeats", "seed", "roster", "timing", "folds",
                                                "arm_iterations", "post", "overrides"};
    if (!doc.is_object()) throw std::invalid_argument("bench config must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) throw std::invalid_argument("bench config: unknown key '" + key + "'");
    }
    BenchConfig config;
    config.dataset = doc.at("dataset").get<std::string>();
    if (config.dataset.is_relative() && !base_dir.empty()) config.dataset = base_dir / config.dataset;
    config.target = doc.at("target").get<std::string>();
    config.header = doc.value("header", true);
    config.name = doc.value("name", config.dataset.stem().string());
    config.test_fraction = doc.value("test_fraction", 0.25);
    config.n_repeats = doc.value("n_repeats", std::size_t{10});
    config.seed = doc.value("seed", std::uint64_t{1});
    config.roster = doc.at("roster").get<std::vector<std::string>>();
    const auto timing = doc.value("timing", std::string("strict"));
    if (timing != "strict") throw std::invalid_argument("bench config: only \"strict\" timing is supported");
    config.settings.folds = doc.value("folds", std::size_t{5});
    config.settings.arm_iterations = doc.value("arm_iterations", std::size_t{20});
    if (doc.contains("post")) {
        const auto& post = doc.at("post");
        for (const auto& [key, value] : post.items()) {
            if (!kPostKeys.count(key)) throw std::invalid_argument("bench config: unknown post key '" + key + "'");
        }
        apply_post_overrides(config.settings.post, post);
    }
    if (doc.contains("overrides")) {
        for (const auto& [label, value] : doc.at("overrides").items()) {
            config.settings.overrides[label] = value;
        }
    }
    config.validate();
    return config;
}

std::vector<BenchSummary> BenchReport::summary() const {
    std::vector<BenchSummary> out;
    for (const auto& model : models) {
        BenchSummary s{model, 0.0, 0.0};
        std::size_t count = 0;
        for (const auto& row : rows) {
            if (row.model != model) continue;
            s.mean_mse += row.mse;
            s.mean_seconds += row.seconds;
            ++count;
        }
        if (count > 0) {
            s.mean_mse /= static_cast<double>(count);
            s.mean_seconds /= static_cast<double>(count);
        }
        out.push_back(s);
    }
    return out;
}

std::vector<BenchRow> run_repeat(const Dataset& data, const SplitIndices& split,
                                 std::span<const std::string> roster, std::size_t repeat,
                                 std::uint64_t seed, const BenchSettings& settings) {
    auto train = std::make_shared<const Dataset>(data.subset(split.train));
    PipelineRunner runner(train, seed, settings);
    std::vector<BenchRow> rows;
    for (const auto& name : roster) {
        const auto& fitted = runner.fit(model_label_from_string(name));
        double sse = 0.0;
        for (auto i : split.test) {
            const double r = data.response(i) - fitted.predictor(data.row(i));
            sse += r * r;
        }
        rows.push_back({name, repeat, sse / static_cast<double>(split.test.size()), fitted.seconds});
    }
    return rows;
}

BenchReport run_bench(const BenchConfig& config, const Dataset& data) {
    config.validate();
    BenchReport report;
    report.dataset = config.name.empty() ? config.dataset.stem().string() : config.name;
    report.models = config.roster;
    for (std::size_t r = 0; r < config.n_repeats; ++r) {
        const auto repeat_seed = mix_seed(config.seed, r);
        Rng split_rng(repeat_seed);
        const auto split = shuffle_split(data.n_rows(), config.test_fraction, split_rng);
        auto rows = run_repeat(data, split, config.roster, r, mix_seed(repeat_seed, 1), config.settings);
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    return report;
}

BenchReport run_bench(const BenchConfig& config) {
    config.validate();
    const auto data = load_csv(config.dataset, config.target, config.header);
    return run_bench(config, data);
}

namespace {

std::string format_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace

std::string emit_report(const BenchReport& report, ReportFormat format, bool with_seconds) {
    if (report.models.empty()) throw std::invalid_argument("emit_report: empty report");
    std::ostringstream out;
    if (format == ReportFormat::csv) {
        out.precision(17);
        out << (with_seconds ? "model,repeat,mse,seconds\n" : "model,repeat,mse\n");
        for (const auto& row : report.rows) {
            out << row.model << ',' << row.repeat << ',' << row.mse;
            if (with_seconds) out << ',' << row.seconds;
            out << '\n';
        }
        for (const auto& s : report.summary()) {
            out << s.model << ",mean," << s.mean_mse;
            if (with_seconds) out << ',' << s.mean_seconds;
            out << '\n';
        }
        return out.str();
    }

    const auto summary = report.summary();
    std::vector<std::string> cells;
    std::size_t label_width = 5;
    std::size_t cell_width = report.dataset.size();
    for (const auto& s : summary) {
        cells.push_back(format_fixed(s.mean_mse, 2));
        if (with_seconds) cells.back() += " (" + format_fixed(s.mean_seconds, 2) + ")";
        label_width = std::max(label_width, s.model.size());
        cell_width = std::max(cell_width, cells.back().size());
    }
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size(), ' '); };
    out << pad("Model", label_width) << " | " << report.dataset << '\n';
    out << std::string(label_width, '-') << "-+-" << std::string(cell_width, '-') << '\n';
    for (std::size_t i = 0; i < summary.size(); ++i) {
        out << pad(summary[i].model, label_width) << " | " << cells[i] << '\n';
    }
    return out.str();
}

BenchReport parse_report_csv(const std::string& csv, const std::string& dataset) {
    BenchReport report;
    report.dataset = dataset;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || (line != "model,repeat,mse,seconds" && line != "model,repeat,mse")) {
        throw std::invalid_argument("parse_report_csv: unexpected header");
    }
    const std::size_t width = line == "model,repeat,mse" ? 3 : 4;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != width) throw std::invalid_argument("parse_report_csv: bad line '" + line + "'");
        if (std::find(report.models.begin(), report.models.end(), f[0]) == report.models.end()) {
            report.models.push_back(f[0]);
        }
        if (f[1] == "mean") continue;
        report.rows.push_back({f[0], std::stoul(f[1]), std::stod(f[2]), width == 4 ? std::stod(f[3]) : 0.0});
    }
    return report;
}

}  // namespace isle

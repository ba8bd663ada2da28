#include <doctest.h>

#include <cmath>

#include "isle/bench.hpp"
#include "support/synthetic.hpp"

using namespace isle;
using nlohmann::json;

namespace {

/// Small trees and grids so that every label runs in well under a second.
BenchSettings quick_settings() {
    BenchSettings s;
    s.folds = 3;
    s.arm_iterations = 2;
    s.post.grid.n_lambdas = 8;
    s.post.grid.alphas = {0.5};
    s.post.grid.gammas = {1.0};
    s.overrides["RF2"] = json{{"n_trees", 15}};
    s.overrides["MART2"] = json{{"n_trees", 15}, {"nu", 0.1}};
    s.overrides["RF1"] = json{{"rf_m_grid", {2}}};
    s.overrides["MART1"] = json{{"mart_depth_grid", {2}}, {"mart_m_grid", {10}}, {"mart_nu_grid", {0.1}}};
    return s;
}

BenchConfig quick_config(std::vector<std::string> roster, std::size_t repeats) {
    BenchConfig c;
    c.dataset = "synthetic.csv";
    c.target = "y";
    c.n_repeats = repeats;
    c.roster = std::move(roster);
    c.settings = quick_settings();
    return c;
}

}  // namespace

TEST_CASE("labels map to their documented compositions") {
    for (std::size_t i = 0; i < kModelLabels.size(); ++i) {
        CHECK(to_string(model_label_from_string(kModelLabels[i])) == kModelLabels[i]);
    }
    CHECK_THROWS(model_label_from_string("RF3"));

    const BenchSettings s;
    const auto rf2 = build_pipeline(ModelLabel::RF2, 400, 13, s);
    CHECK(rf2.kind == PipelineKind::isle);
    CHECK(rf2.params.mode == EnsembleMode::rf);
    CHECK(rf2.params.shrinkage == 0.0);
    CHECK(rf2.params.tree.feature_subsample == std::optional<std::size_t>(4));

    const auto mart2 = build_pipeline(ModelLabel::MART2, 400, 13, s);
    CHECK(mart2.params.tree.max_depth == std::optional<std::size_t>(2));
    CHECK(mart2.params.subsample_fraction == 0.2);
    CHECK(mart2.params.shrinkage == 0.01);

    const auto arm = build_pipeline(ModelLabel::ARM_enet, 400, 13, s);
    CHECK(arm.kind == PipelineKind::arm);
    CHECK(arm.components == std::vector<ModelLabel>{ModelLabel::RF_enet, ModelLabel::MART_enet});
    CHECK(build_pipeline(ModelLabel::ARM_tree, 400, 13, s).components ==
          std::vector<ModelLabel>{ModelLabel::RF1, ModelLabel::MART1});

    const auto mart_aenet = build_pipeline(ModelLabel::MART_aenet, 400, 13, s);
    CHECK(mart_aenet.kind == PipelineKind::post);
    CHECK(mart_aenet.penalty == PenaltyKind::adaptive_elastic_net);
    CHECK(mart_aenet.components == std::vector<ModelLabel>{ModelLabel::MART2});

    CHECK(build_pipeline(ModelLabel::RF1, 400, 13, s).kind == PipelineKind::tuned);
}

TEST_CASE("unknown override keys are rejected") {
    BenchSettings s;
    s.overrides["RF2"] = json{{"trees", 10}};
    CHECK_THROWS_AS(build_pipeline(ModelLabel::RF2, 100, 5, s), std::invalid_argument);
    s.overrides["RF2"] = json{{"n_trees", 10}, {"max_depth", nullptr}};
    CHECK_FALSE(build_pipeline(ModelLabel::RF2, 100, 5, s).params.tree.max_depth);
    s.overrides["RF_lasso"] = json{{"iterations", 3}};
    CHECK_THROWS_AS(build_pipeline(ModelLabel::RF_lasso, 100, 5, s), std::invalid_argument);
}

TEST_CASE("one model, one repeat gives one row") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 1);
    const auto report = run_bench(quick_config({"RF2"}, 1), d);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].model == "RF2");
    CHECK(report.rows[0].seconds >= 0.0);
    const auto summary = report.summary();
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].mean_mse == report.rows[0].mse);

    const auto text = emit_report(report, ReportFormat::text);
    CHECK(text.find("RF2") != std::string::npos);
    CHECK(text.find("synthetic") != std::string::npos);
}

TEST_CASE("an empty roster fails before fitting") {
    const auto d = isle::testing::friedman1(40, 3, 1.0, 2);
    CHECK_THROWS_AS(run_bench(quick_config({}, 1), d), std::invalid_argument);
    CHECK_THROWS_AS(run_bench(quick_config({"RF9"}, 1), d), std::invalid_argument);
}

TEST_CASE("every label runs and the report means are arithmetic means") {
    const auto d = isle::testing::friedman1(100, 5, 1.0, 3);
    std::vector<std::string> roster(kModelLabels.begin(), kModelLabels.end());
    const auto report = run_bench(quick_config(roster, 2), d);
    CHECK(report.rows.size() == 34);
    for (const auto& row : report.rows) {
        CHECK(std::isfinite(row.mse));
        CHECK(row.seconds >= 0.0);
    }
    for (const auto& s : report.summary()) {
        double total = 0.0;
        int count = 0;
        for (const auto& row : report.rows) {
            if (row.model == s.model) {
                total += row.mse;
                ++count;
            }
        }
        CHECK(count == 2);
        CHECK(std::abs(s.mean_mse - total / count) <= 1e-12 * std::abs(s.mean_mse));
    }
}

TEST_CASE("post-processed and ARM times include their components") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 4);
    PipelineRunner runner(std::make_shared<const Dataset>(d), 7, quick_settings());
    const double rf2 = runner.fit(ModelLabel::RF2).seconds;
    const double lasso = runner.fit(ModelLabel::RF_lasso).seconds;
    CHECK(lasso >= rf2);
    const auto& arm = runner.fit(ModelLabel::ARM_lasso);
    CHECK(arm.seconds >= lasso);
    REQUIRE(arm.arm_weights);
    CHECK(arm.arm_weights->labels == std::vector<std::string>{"RF_lasso", "MART_lasso"});
}

TEST_CASE("the report is reproducible from the seed") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 5);
    const auto config = quick_config({"RF2", "MART_lasso", "ARM_lasso"}, 2);
    const auto a = run_bench(config, d);
    const auto b = run_bench(config, d);
    CHECK(emit_report(a, ReportFormat::csv, false) == emit_report(b, ReportFormat::csv, false));
}

TEST_CASE("csv output parses back to the same report") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 6);
    const auto report = run_bench(quick_config({"RF2", "MART2"}, 3), d);
    for (bool seconds : {true, false}) {
        const auto back = parse_report_csv(emit_report(report, ReportFormat::csv, seconds), report.dataset);
        REQUIRE(back.rows.size() == report.rows.size());
        for (std::size_t i = 0; i < back.rows.size(); ++i) {
            CHECK(back.rows[i].model == report.rows[i].model);
            CHECK(back.rows[i].repeat == report.rows[i].repeat);
            CHECK(back.rows[i].mse == report.rows[i].mse);
            if (seconds) CHECK(back.rows[i].seconds == report.rows[i].seconds);
        }
        CHECK(back.models == report.models);
    }
}

TEST_CASE("test rows are invisible to every fit") {
    const auto d = isle::testing::friedman1(90, 5, 1.0, 7);
    Rng split_rng(3);
    const auto split = shuffle_split(90, 0.25, split_rng);
    Eigen::VectorXd poisoned = d.response();
    for (auto i : split.test) poisoned(static_cast<Eigen::Index>(i)) = 1e6;
    const auto dirty = d.with_response(poisoned);

    const std::vector<std::string> roster{"RF2", "RF_alasso", "MART1", "ARM_lasso"};
    const auto rows = run_repeat(dirty, split, roster, 0, 11, quick_settings());

    // A runner that only ever held the clean training rows must reproduce the scores.
    PipelineRunner clean(std::make_shared<const Dataset>(d.subset(split.train)), 11, quick_settings());
    for (std::size_t k = 0; k < roster.size(); ++k) {
        const auto& fitted = clean.fit(model_label_from_string(roster[k]));
        double sse = 0.0;
        for (auto i : split.test) {
            const double r = dirty.response(i) - fitted.predictor(dirty.row(i));
            sse += r * r;
        }
        CHECK(rows[k].mse == sse / static_cast<double>(split.test.size()));
    }
}

TEST_CASE("config parsing") {
    const auto doc = json::parse(R"({
        "dataset": "data/boston.csv", "target": "medv", "n_repeats": 3, "seed": 9,
        "roster": ["RF2", "RF_lasso"], "folds": 4,
        "post": {"n_lambdas": 20},
        "overrides": {"RF2": {"n_trees": 50}}
    })");
    const auto c = bench_config_from_json(doc, "/base");
    CHECK(c.dataset == std::filesystem::path("/base/data/boston.csv"));
    CHECK(c.n_repeats == 3);
    CHECK(c.seed == 9);
    CHECK(c.settings.folds == 4);
    CHECK(c.settings.post.grid.n_lambdas == 20);
    CHECK(c.name == "boston");

    auto bad = doc;
    bad["colour"] = "red";
    CHECK_THROWS_AS(bench_config_from_json(bad), std::invalid_argument);
    bad = doc;
    bad["timing"] = "relaxed";
    CHECK_THROWS_AS(bench_config_from_json(bad), std::invalid_argument);
    bad = doc;
    bad["roster"] = json::array();
    CHECK_THROWS_AS(bench_config_from_json(bad), std::invalid_argument);
    bad = doc;
    bad["n_repeats"] = 0;
    CHECK_THROWS_AS(bench_config_from_json(bad), std::invalid_argument);
}

TEST_CASE("a failing pipeline names its label") {
    const auto d = isle::testing::friedman1(40, 3, 1.0, 8);
    auto settings = quick_settings();
    settings.overrides["MART2"] = json{{"nu", 5.0}};
    PipelineRunner runner(std::make_shared<const Dataset>(d), 1, settings);
    try {
        runner.fit(ModelLabel::MART_lasso);
        FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
        CHECK((e.label() == "MART2" || e.label() == "MART_lasso"));
    }
}

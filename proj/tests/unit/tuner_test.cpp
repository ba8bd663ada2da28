#include <doctest.h>

#include <sstream>

#include "isle/tuner.hpp"
#include "support/synthetic.hpp"

using namespace isle;

namespace {

TuningGrid small_mart_grid() {
    TuningGrid g;
    g.mart_depth_grid = {1, 2};
    g.mart_m_grid = {10, 20};
    g.mart_nu_grid = {0.1};
    return g;
}

void check_argmin(const TuningResult& r) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& row : r.cv_table) best = std::min(best, row.mean_mse);
    bool found = false;
    for (const auto& row : r.cv_table) {
        if (row.params == r.best_params) {
            found = true;
            CHECK(row.mean_mse == best);
        }
    }
    CHECK(found);
}

}  // namespace

TEST_CASE("default grids") {
    const auto g = TuningGrid::defaults(13);
    CHECK(g.rf_m_grid == std::vector<std::size_t>{3, 5, 7, 13});
    CHECK(TuningGrid::defaults(1).rf_m_grid == std::vector<std::size_t>{1});
    CHECK(g.mart_depth_grid == std::vector<std::size_t>{2, 4, 6});
    CHECK(g.mart_m_grid == std::vector<std::size_t>{100, 300});
    CHECK(g.mart_nu_grid == std::vector<double>{0.01, 0.1});
}

TEST_CASE("a single-point grid returns that point") {
    const auto d = isle::testing::friedman1(60, 5, 1.0, 1);
    TuningGrid g;
    g.rf_m_grid = {2};
    const auto r = tune(d, all_rows(60), EnsembleMode::rf, g, 3, 4);
    CHECK(r.cv_table.size() == 1);
    CHECK(r.best_params.tree.feature_subsample == std::optional<std::size_t>(2));
}

TEST_CASE("table size is the grid product and the best row is the argmin") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 2);
    const auto r = tune(d, all_rows(80), EnsembleMode::mart, small_mart_grid(), 4, 5);
    CHECK(r.cv_table.size() == 4);
    check_argmin(r);

    TuningGrid rf;
    rf.rf_m_grid = {1, 5};
    const auto rr = tune(d, all_rows(80), EnsembleMode::rf, rf, 3, 5);
    CHECK(rr.cv_table.size() == 2);
    check_argmin(rr);
}

TEST_CASE("ties go to the simpler model") {
    // A constant response makes every grid point score zero.
    auto d = isle::testing::friedman1(40, 3, 1.0, 3);
    d = d.with_response(Eigen::VectorXd::Constant(40, 2.0));
    TuningGrid g;
    g.mart_depth_grid = {3, 1};
    g.mart_m_grid = {8, 4};
    g.mart_nu_grid = {0.5, 0.1};
    const auto r = tune(d, all_rows(40), EnsembleMode::mart, g, 2, 1);
    CHECK(r.best_params.n_trees == 4);
    CHECK(r.best_params.tree.max_depth == std::optional<std::size_t>(1));
    CHECK(r.best_params.shrinkage == 0.1);
}

TEST_CASE("cv scores are recomputable from the declared folds") {
    const auto d = isle::testing::friedman1(50, 4, 1.0, 4);
    const auto rows = all_rows(50);
    const std::uint64_t seed = 6;
    const auto r = tune(d, rows, EnsembleMode::mart, small_mart_grid(), 5, seed);

    Rng fold_rng(seed);
    const auto folds = kfold_indices(rows.size(), 5, fold_rng);
    for (const auto& row : r.cv_table) {
        double total = 0.0;
        for (const auto& fold : folds) {
            const auto e = generate_ensemble(d, fold.train, row.params);
            total += mse(predict_rows(e, d, fold.test), d, fold.test);
        }
        CHECK(row.mean_mse == total / 5.0);
    }
}

TEST_CASE("validation responses never reach training") {
    const auto d = isle::testing::friedman1(50, 4, 1.0, 5);
    const auto rows = all_rows(50);
    const std::uint64_t seed = 8;
    const auto params = tune(d, rows, EnsembleMode::mart, small_mart_grid(), 5, seed).cv_table.front().params;

    Rng fold_rng(seed);
    const auto folds = kfold_indices(rows.size(), 5, fold_rng);
    for (const auto& fold : folds) {
        Eigen::VectorXd poisoned = d.response();
        for (auto i : fold.test) poisoned(static_cast<Eigen::Index>(i)) = 1e6;
        const auto clean = generate_ensemble(d, fold.train, params);
        const auto dirty = generate_ensemble(d.with_response(poisoned), fold.train, params);
        CHECK(clean == dirty);
    }

    // Rows outside the tuning set cannot change the table.
    const IndexList subset(rows.begin(), rows.begin() + 35);
    Eigen::VectorXd poisoned = d.response();
    for (Eigen::Index i = 35; i < 50; ++i) poisoned(i) = -1e6;
    const auto a = tune(d, subset, EnsembleMode::mart, small_mart_grid(), 5, seed);
    const auto b = tune(d.with_response(poisoned), subset, EnsembleMode::mart, small_mart_grid(), 5, seed);
    for (std::size_t i = 0; i < a.cv_table.size(); ++i) CHECK(a.cv_table[i].mean_mse == b.cv_table[i].mean_mse);
}

TEST_CASE("tune rejects empty grids and too few folds") {
    const auto d = isle::testing::friedman1(30, 3, 1.0, 6);
    TuningGrid g;
    CHECK_THROWS(tune(d, all_rows(30), EnsembleMode::rf, g, 3, 1));
    g = small_mart_grid();
    g.mart_nu_grid.clear();
    CHECK_THROWS(tune(d, all_rows(30), EnsembleMode::mart, g, 3, 1));
    CHECK_THROWS(tune(d, all_rows(30), EnsembleMode::mart, small_mart_grid(), 1, 1));
}

TEST_CASE("tuning table csv") {
    const auto d = isle::testing::friedman1(40, 3, 1.0, 7);
    const auto r = tune(d, all_rows(40), EnsembleMode::mart, small_mart_grid(), 2, 1);
    std::ostringstream out;
    write_tuning_table_csv(r, out);
    std::istringstream in(out.str());
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "mode,n_trees,max_depth,shrinkage,feature_subsample,mean_mse");
    CHECK(first.rfind("mart,10,1,", 0) == 0);
    CHECK(std::stod(first.substr(10, first.find(',', 10) - 10)) == 0.1);
}

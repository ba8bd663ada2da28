#include <doctest.h>

#include <cmath>

#include "isle/tree.hpp"
#include "support/synthetic.hpp"
#include "support/tree_oracle.hpp"

using namespace isle;

namespace {

Dataset column_data(std::vector<double> x, std::vector<double> y) {
    RowMatrix m(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = x[i];
    return Dataset(m, Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())), {"x"});
}

std::vector<double> response_vector(const Dataset& d, const IndexList& rows) {
    std::vector<double> y;
    for (auto r : rows) y.push_back(d.response(r));
    return y;
}

}  // namespace

TEST_CASE("best_split splits a step function at the midpoint") {
    const std::vector<double> x{1, 2, 3, 4}, y{0, 0, 1, 1};
    const auto s = best_split(x, y, 1);
    REQUIRE(s);
    CHECK(s->threshold == 2.5);
    CHECK(s->sse_reduction == doctest::Approx(1.0));
}

TEST_CASE("best_split finds nothing on a constant feature") {
    const std::vector<double> x{5, 5, 5}, y{1, 2, 3};
    CHECK_FALSE(best_split(x, y, 1));
}

TEST_CASE("best_split on a constant response returns a zero-gain split") {
    const std::vector<double> x{1, 2}, y{3, 3};
    const auto s = best_split(x, y, 1);
    REQUIRE(s);
    CHECK(s->threshold == 1.5);
    CHECK(s->sse_reduction == 0.0);
}

TEST_CASE("best_split honours the leaf size and breaks ties toward smaller thresholds") {
    const std::vector<double> x{1, 2, 3, 4}, y{0, 0, 1, 1};
    CHECK_FALSE(best_split(x, y, 3));
    // Symmetric response: thresholds 1.5 and 3.5 tie.
    const std::vector<double> x2{1, 2, 3, 4, 5}, y2{1, 0, 0, 0, 1};
    const auto s = best_split(x2, y2, 1);
    REQUIRE(s);
    CHECK(s->threshold == 1.5);
}

TEST_CASE("best_split is independent of input order") {
    const std::vector<double> x{4, 1, 3, 2}, y{1, 0, 1, 0};
    const auto s = best_split(x, y, 1);
    REQUIRE(s);
    CHECK(s->threshold == 2.5);
}

TEST_CASE("a depth-one tree routes <= threshold to the left") {
    const auto d = column_data({1, 2, 3, 4}, {0, 0, 1, 1});
    const auto rows = all_rows(4);
    const auto y = response_vector(d, rows);
    TreeParams p;
    p.max_depth = 1;
    Rng rng(1);
    const auto tree = fit_tree(d, rows, y, p, rng);
    CHECK(tree.n_leaves() == 2);
    const double at[] = {2.5};
    const double above[] = {2.6};
    CHECK(tree.predict(at) == 0.0);
    CHECK(tree.predict(above) == 1.0);
}

TEST_CASE("leaves partition the training rows and hold their means") {
    const auto d = isle::testing::friedman1(80, 5, 1.0, 3);
    const auto rows = all_rows(80);
    const auto y = response_vector(d, rows);
    TreeParams p;
    p.max_depth = 3;
    p.min_samples_leaf = 4;
    Rng rng(2);
    const auto tree = fit_tree(d, rows, y, p, rng);
    CHECK(tree.depth() <= 3);

    std::map<std::size_t, std::pair<double, std::size_t>> per_leaf;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto leaf = tree.leaf_index(d.row(rows[i]));
        REQUIRE(tree.nodes()[leaf].is_leaf());
        per_leaf[leaf].first += y[i];
        per_leaf[leaf].second += 1;
    }
    std::size_t covered = 0;
    for (const auto& [leaf, acc] : per_leaf) {
        CHECK(acc.second >= 4);
        CHECK(acc.second == tree.nodes()[leaf].count);
        CHECK(tree.nodes()[leaf].value == doctest::Approx(acc.first / static_cast<double>(acc.second)));
        covered += acc.second;
    }
    CHECK(covered == rows.size());
    CHECK(per_leaf.size() == tree.n_leaves());
}

TEST_CASE("training SSE does not increase with depth") {
    const auto d = isle::testing::friedman1(120, 6, 1.0, 5);
    const auto rows = all_rows(120);
    const auto y = response_vector(d, rows);
    double previous = std::numeric_limits<double>::infinity();
    for (std::size_t depth = 0; depth <= 6; ++depth) {
        TreeParams p;
        p.max_depth = depth;
        Rng rng(1);
        const double sse = tree_sse(fit_tree(d, rows, y, p, rng), d, rows, y);
        CHECK(sse <= previous + 1e-9);
        previous = sse;
    }
}

TEST_CASE("max_terminal_nodes caps the leaf count") {
    const auto d = isle::testing::friedman1(100, 4, 1.0, 8);
    const auto rows = all_rows(100);
    const auto y = response_vector(d, rows);
    for (std::size_t cap : {2, 3, 5, 8}) {
        TreeParams p;
        p.max_terminal_nodes = cap;
        Rng rng(1);
        CHECK(fit_tree(d, rows, y, p, rng).n_leaves() == cap);
    }
}

TEST_CASE("fit_tree matches the exhaustive greedy oracle") {
    Rng meta(77);
    for (int instance = 0; instance < 40; ++instance) {
        const std::size_t n = 4 + meta.uniform_index(12);
        const std::size_t p = 1 + meta.uniform_index(3);
        const std::size_t depth = 1 + meta.uniform_index(3);
        const std::size_t min_leaf = 1 + meta.uniform_index(2);
        const auto d = isle::testing::grid_data(n, p, 4, meta.next());
        const auto rows = all_rows(n);
        const auto y = response_vector(d, rows);
        TreeParams params;
        params.max_depth = depth;
        params.min_samples_leaf = min_leaf;
        Rng rng(1);
        const auto tree = fit_tree(d, rows, y, params, rng);
        isle::testing::GreedyOracle oracle(d, rows, y, depth, min_leaf);
        const auto expected = oracle.leaf_of_rows();
        const auto actual = isle::testing::tree_partition(tree, d, rows);
        CHECK(isle::testing::canonical(actual) == isle::testing::canonical(expected));
        CHECK(isle::testing::partition_sse(actual, y) == isle::testing::partition_sse(expected, y));
    }
}

TEST_CASE("feature subsampling is reproducible from the seed") {
    const auto d = isle::testing::friedman1(60, 8, 1.0, 4);
    const auto rows = all_rows(60);
    const auto y = response_vector(d, rows);
    TreeParams p;
    p.max_depth = 4;
    p.feature_subsample = 3;
    Rng a(10), b(10);
    CHECK(fit_tree(d, rows, y, p, a) == fit_tree(d, rows, y, p, b));
}

TEST_CASE("fit_tree rejects invalid settings") {
    const auto d = isle::testing::friedman1(20, 3, 1.0, 1);
    const auto rows = all_rows(20);
    const auto y = response_vector(d, rows);
    Rng rng(1);
    TreeParams p;
    p.min_samples_leaf = 0;
    CHECK_THROWS_AS(fit_tree(d, rows, y, p, rng), std::invalid_argument);
    p = {};
    p.feature_subsample = 4;
    CHECK_THROWS_AS(fit_tree(d, rows, y, p, rng), std::invalid_argument);
    p = {};
    p.max_terminal_nodes = 1;
    CHECK_THROWS_AS(fit_tree(d, rows, y, p, rng), std::invalid_argument);
    CHECK_THROWS_AS(fit_tree(d, IndexList{}, std::vector<double>{}, TreeParams{}, rng), std::invalid_argument);
}

TEST_CASE("a tree with unreachable nodes is rejected") {
    std::vector<RegressionTree::Node> nodes(3);
    CHECK_THROWS(RegressionTree(nodes));
}

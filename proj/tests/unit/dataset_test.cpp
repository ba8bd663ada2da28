#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "isle/dataset.hpp"
#include "support/synthetic.hpp"

using namespace isle;
using isle::testing::TempDir;
using isle::testing::write_text;

namespace {

void check_partition(const std::vector<const IndexList*>& parts, std::size_t n) {
    std::vector<std::size_t> all;
    for (const auto* part : parts) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(all[i] == i);
}

}  // namespace

TEST_CASE("load_csv moves the target column into the response") {
    TempDir dir("csv_basic");
    write_text(dir / "d.csv", "a,b,y\n1,2,3\n4,5,6\n7,8,9\n10,11,12\n");
    const auto d = load_csv(dir / "d.csv", "y");
    CHECK(d.n_rows() == 4);
    CHECK(d.n_features() == 2);
    CHECK(d.feature_names() == std::vector<std::string>{"a", "b"});
    CHECK(d.response_name() == "y");
    CHECK(d.feature(2, 1) == 8.0);
    CHECK(d.response(3) == 12.0);
}

TEST_CASE("target column may sit anywhere") {
    TempDir dir("csv_middle");
    write_text(dir / "d.csv", "a,y,b\n1,2,3\n4,5,6\n");
    const auto d = load_csv(dir / "d.csv", "y");
    CHECK(d.feature(1, 0) == 4.0);
    CHECK(d.feature(1, 1) == 6.0);
    CHECK(d.response(1) == 5.0);
}

TEST_CASE("unparseable cells are reported with row and column") {
    TempDir dir("csv_na");
    write_text(dir / "d.csv", "a,b,y\n1,2,3\n4,NA,6\n");
    try {
        load_csv(dir / "d.csv", "y");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("'b'") != std::string::npos);
        CHECK(msg.find("NA") != std::string::npos);
    }
}

TEST_CASE("load_csv rejects malformed inputs") {
    TempDir dir("csv_bad");
    write_text(dir / "one_row.csv", "a,y\n1,2\n");
    CHECK_THROWS_AS(load_csv(dir / "one_row.csv", "y"), DataError);
    write_text(dir / "ragged.csv", "a,y\n1,2\n3\n");
    CHECK_THROWS_AS(load_csv(dir / "ragged.csv", "y"), DataError);
    write_text(dir / "ok.csv", "a,y\n1,2\n3,4\n");
    CHECK_THROWS_AS(load_csv(dir / "ok.csv", "target"), DataError);
    CHECK_THROWS_AS(load_csv(dir / "missing.csv", "y"), DataError);
    write_text(dir / "inf.csv", "a,y\n1,2\ninf,4\n");
    CHECK_THROWS_AS(load_csv(dir / "inf.csv", "y"), DataError);
    write_text(dir / "only_target.csv", "y\n1\n2\n");
    CHECK_THROWS_AS(load_csv(dir / "only_target.csv", "y"), DataError);
}

TEST_CASE("quoted fields, CRLF line ends and a byte-order mark are accepted") {
    TempDir dir("csv_quotes");
    write_text(dir / "d.csv", "\xEF\xBB\xBF\"a\",\"the y\"\r\n\"1.5\",2\r\n3,\"4\"\r\n");
    const auto d = load_csv(dir / "d.csv", "the y");
    CHECK(d.feature_names() == std::vector<std::string>{"a"});
    CHECK(d.feature(0, 0) == 1.5);
    CHECK(d.response(1) == 4.0);
}

TEST_CASE("headerless files name columns by position") {
    TempDir dir("csv_noheader");
    write_text(dir / "d.csv", "1,2,3\n4,5,6\n");
    const auto by_name = load_csv(dir / "d.csv", "c2", false);
    const auto by_index = load_csv(dir / "d.csv", "2", false);
    CHECK(by_name.response(1) == 6.0);
    CHECK(by_index.response(1) == 6.0);
    CHECK(by_index.feature_names() == std::vector<std::string>{"c0", "c1"});
}

TEST_CASE("save_csv then load_csv round-trips bit-exactly") {
    TempDir dir("csv_roundtrip");
    const auto d = isle::testing::friedman1(30, 4, 1.0, 17);
    save_csv(d, dir / "d.csv");
    const auto back = load_csv(dir / "d.csv", d.response_name());
    CHECK(back.features() == d.features());
    CHECK(back.response() == d.response());
    CHECK(back.feature_names() == d.feature_names());
}

TEST_CASE("Boston table has 506 rows and 13 features") {
    const auto d = load_csv(std::filesystem::path(ISLE_DATA_DIR) / "boston.csv", "medv");
    CHECK(d.n_rows() == 506);
    CHECK(d.n_features() == 13);
}

TEST_CASE("Diabetes table has 442 rows and 10 features") {
    const auto d = load_csv(std::filesystem::path(ISLE_DATA_DIR) / "diabetes.csv", "y");
    CHECK(d.n_rows() == 442);
    CHECK(d.n_features() == 10);
}

TEST_CASE("Dataset construction enforces its invariants") {
    RowMatrix x(2, 1);
    x << 1, 2;
    CHECK_THROWS(Dataset(x, Eigen::VectorXd::Zero(3), {"a"}));
    CHECK_THROWS(Dataset(x, Eigen::VectorXd::Zero(2), {"a", "b"}));
    RowMatrix one(1, 1);
    one << 1;
    CHECK_THROWS(Dataset(one, Eigen::VectorXd::Zero(1), {"a"}));
    x(1, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(Dataset(x, Eigen::VectorXd::Zero(2), {"a"}));
}

TEST_CASE("subset copies rows in the requested order") {
    const auto d = isle::testing::friedman1(10, 3, 0.0, 1);
    const IndexList rows{7, 2};
    const auto s = d.subset(rows);
    CHECK(s.n_rows() == 2);
    CHECK(s.feature(0, 1) == d.feature(7, 1));
    CHECK(s.response(1) == d.response(2));
}

TEST_CASE("shuffle_split sizes follow round(n * fraction)") {
    Rng rng(1);
    auto s = shuffle_split(10, 0.2, rng);
    CHECK(s.train.size() == 8);
    CHECK(s.test.size() == 2);
    check_partition({&s.train, &s.test}, 10);

    Rng rng2(1);
    CHECK(shuffle_split(100, 0.25, rng2).test.size() == 25);
}

TEST_CASE("shuffle_split is deterministic given the seed") {
    Rng a(99), b(99);
    const auto s1 = shuffle_split(50, 0.3, a);
    const auto s2 = shuffle_split(50, 0.3, b);
    CHECK(s1.train == s2.train);
    CHECK(s1.test == s2.test);
}

TEST_CASE("shuffle_split rejects degenerate sizes") {
    Rng rng(1);
    CHECK_THROWS(shuffle_split(10, 0.0, rng));
    CHECK_THROWS(shuffle_split(10, 1.0, rng));
    CHECK_THROWS(shuffle_split(3, 0.1, rng));
    CHECK_THROWS(shuffle_split(3, 0.9, rng));
}

TEST_CASE("kfold_indices partitions with sizes differing by at most one") {
    Rng rng(4);
    const auto folds = kfold_indices(10, 5, rng);
    REQUIRE(folds.size() == 5);
    std::vector<const IndexList*> tests;
    for (const auto& f : folds) {
        CHECK(f.test.size() == 2);
        CHECK(f.train.size() == 8);
        std::set<std::size_t> train(f.train.begin(), f.train.end());
        for (auto i : f.test) CHECK(train.count(i) == 0);
        tests.push_back(&f.test);
    }
    check_partition(tests, 10);

    Rng rng7(4);
    std::vector<std::size_t> sizes;
    for (const auto& f : kfold_indices(7, 5, rng7)) sizes.push_back(f.test.size());
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{1, 1, 1, 2, 2});

    Rng rng5(4);
    for (const auto& f : kfold_indices(5, 5, rng5)) CHECK(f.test.size() == 1);

    CHECK_THROWS(kfold_indices(5, 1, rng));
    CHECK_THROWS(kfold_indices(5, 6, rng));
}

TEST_CASE("three_way_split follows the 2:1:1 rounding rule") {
    CHECK(three_way_sizes(8).n1 == 4);
    CHECK(three_way_sizes(8).n2 == 2);
    CHECK(three_way_sizes(8).n3 == 2);
    CHECK(three_way_sizes(9).n1 == 5);
    CHECK(three_way_sizes(9).n2 == 2);
    CHECK(three_way_sizes(9).n3 == 2);
    // ceil(442/2) = 221, ceil(221/2) = 111, 442 - 332 = 110
    CHECK(three_way_sizes(442).n1 == 221);
    CHECK(three_way_sizes(442).n2 == 111);
    CHECK(three_way_sizes(442).n3 == 110);

    Rng rng(2);
    for (std::size_t n = 8; n < 60; ++n) {
        const auto s = three_way_split(n, rng);
        CHECK(s.z1.size() == (n + 1) / 2);
        check_partition({&s.z1, &s.z2, &s.z3}, n);
    }
}

TEST_CASE("three_way_split needs at least two rows per part") {
    Rng rng(2);
    CHECK_THROWS(three_way_split(7, rng));
    CHECK_THROWS(three_way_split(6, rng));
    CHECK_NOTHROW(three_way_split(8, rng));
}

TEST_CASE("take maps positions back to row ids") {
    const IndexList rows{10, 20, 30, 40};
    const IndexList pos{3, 0};
    CHECK(take(rows, pos) == IndexList{40, 10});
}

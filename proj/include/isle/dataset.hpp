#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isle/rng.hpp"

namespace isle {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IndexList = std::vector<std::size_t>;

/// Raised for malformed input files. The message names the offending
/// location when one exists.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Immutable feature matrix plus response. Rows are contiguous so a single
/// observation can be handed out as a span.
class Dataset {
public:
    Dataset(RowMatrix features, Eigen::VectorXd response, std::vector<std::string> feature_names,
            std::string response_name = "y");

    std::size_t n_rows() const { return static_cast<std::size_t>(features_.rows()); }
    std::size_t n_features() const { return static_cast<std::size_t>(features_.cols()); }

    const RowMatrix& features() const { return features_; }
    const Eigen::VectorXd& response() const { return response_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::string& response_name() const { return response_name_; }

    std::span<const double> row(std::size_t i) const {
        return {features_.data() + i * n_features(), n_features()};
    }
    double feature(std::size_t i, std::size_t j) const { return features_(i, j); }
    double response(std::size_t i) const { return response_(i); }

    /// Copy of the selected rows, in the given order.
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Same features, different response (length must match).
    Dataset with_response(Eigen::VectorXd response) const;

    /// Response values at the given rows.
    Eigen::VectorXd response_at(std::span<const std::size_t> rows) const;

private:
    RowMatrix features_;
    Eigen::VectorXd response_;
    std::vector<std::string> feature_names_;
    std::string response_name_;
};

/// 0..n-1.
IndexList all_rows(std::size_t n);

/// Reads a comma-separated file. Without a header, columns are named
/// c0, c1, ... and target_column may also be given as a 0-based index.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 bool header = true);

/// Writes features then the response column, 17 significant digits, with header.
void save_csv(const Dataset& data, const std::filesystem::path& path);

struct SplitIndices {
    IndexList train;
    IndexList test;
};

struct ThreeWaySplit {
    IndexList z1;
    IndexList z2;
    IndexList z3;
};

/// Random train/test partition of 0..n-1 with |test| = round(n * test_fraction).
SplitIndices shuffle_split(std::size_t n, double test_fraction, Rng& rng);

/// k folds over a random permutation; fold sizes differ by at most one and
/// the first n % k folds get the extra element.
std::vector<SplitIndices> kfold_indices(std::size_t n, std::size_t k, Rng& rng);

/// Permute then cut into parts of sizes ceil(n/2), ceil((n - n1)/2), remainder.
ThreeWaySplit three_way_split(std::size_t n, Rng& rng);

/// Sizes used by three_way_split.
struct ThreeWaySizes {
    std::size_t n1, n2, n3;
};
ThreeWaySizes three_way_sizes(std::size_t n);

/// Maps positions into `rows` back to row ids: out[i] = rows[positions[i]].
IndexList take(std::span<const std::size_t> rows, std::span<const std::size_t> positions);

}  // namespace isle

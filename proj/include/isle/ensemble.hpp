#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isle/dataset.hpp"
#include "isle/rng.hpp"
#include "isle/tree.hpp"

namespace isle {

/// Loss used during ensemble generation. Only squared error (L = (y - F)^2 / 2)
/// is implemented; the enum is the extension point for other losses.
enum class Loss { squared_error };

/// MART: sequential boosting, F_m = F_{m-1} + shrinkage * b_m.
/// RF: independent trees fit to y, prediction is the plain tree average.
enum class EnsembleMode { mart, rf };

std::string to_string(Loss loss);
std::string to_string(EnsembleMode mode);
Loss loss_from_string(const std::string& name);
EnsembleMode mode_from_string(const std::string& name);

struct EnsembleParams {
    std::size_t n_trees = 200;
    double shrinkage = 0.01;
    double subsample_fraction = 0.2;
    TreeParams tree;
    Loss loss = Loss::squared_error;
    EnsembleMode mode = EnsembleMode::mart;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range values. RF mode requires
    /// shrinkage == 0; MART mode requires shrinkage in (0, 1].
    void validate(std::size_t n_features) const;

    /// Tree count used when none is given. Forests: 200 below 1000 rows,
    /// else 500. Boosting at shrinkage 0.01: 100 below 1000 rows, else 250.
    static std::size_t default_tree_count(std::size_t n_rows, EnsembleMode mode = EnsembleMode::rf);

    /// Small-tree boosting: depth 2, 20% subsamples, shrinkage 0.01.
    static EnsembleParams mart_isle(std::size_t n_rows);

    /// Random-forest generation: shrinkage 0, 40% subsamples, round(p/3)
    /// features per split, min leaf 5, depth-limited trees.
    static EnsembleParams rf_isle(std::size_t n_rows, std::size_t n_features);

    bool operator==(const EnsembleParams&) const = default;
};

/// Ensemble of raw (unshrunk) trees b_1..b_M plus the constant F_0.
class Ensemble {
public:
    Ensemble() = default;
    Ensemble(double f0, std::vector<RegressionTree> trees, double shrinkage, EnsembleMode mode);

    double f0() const { return f0_; }
    double shrinkage() const { return shrinkage_; }
    EnsembleMode mode() const { return mode_; }
    const std::vector<RegressionTree>& trees() const { return trees_; }
    std::size_t size() const { return trees_.size(); }

    /// MART: f0 + shrinkage * (sum of tree outputs, accumulated in tree order).
    /// RF: mean of tree outputs (f0 unused); f0 when there are no trees.
    double predict(std::span<const double> x) const;

    bool operator==(const Ensemble&) const = default;

private:
    double f0_ = 0.0;
    std::vector<RegressionTree> trees_;
    double shrinkage_ = 0.0;
    EnsembleMode mode_ = EnsembleMode::mart;
};

/// Loss-minimizing constant (the mean for squared error).
double fit_f0(std::span<const double> y, Loss loss);

/// Elementwise -dL/dF at f.
std::vector<double> negative_gradient(std::span<const double> y, std::span<const double> f, Loss loss);

/// max(1, round(n * eta)) distinct indices: the prefix of a random permutation.
IndexList subsample(std::size_t n, double eta, Rng& rng);

/// Replaces every leaf value with the loss-optimal step for the points of
/// `rows` that fall in it, given the previous fit f_prev (aligned with rows).
RegressionTree fit_terminal_gammas(const RegressionTree& tree, const Dataset& data,
                                   std::span<const std::size_t> rows, std::span<const double> y,
                                   std::span<const double> f_prev, Loss loss);

/// Ensemble generation over the given training rows. Tree m uses the
/// generator stream mix_seed(params.seed, m), both for its row subsample and
/// its per-node feature draws, so RF-mode trees do not depend on each other.
Ensemble generate_ensemble(const Dataset& data, std::span<const std::size_t> rows,
                           const EnsembleParams& params);
Ensemble generate_ensemble(const Dataset& data, const EnsembleParams& params);

inline double predict_ensemble(const Ensemble& e, std::span<const double> x) { return e.predict(x); }

/// Column m holds tree m's raw output at each of the given rows.
Eigen::MatrixXd predict_basis(const Ensemble& e, const Dataset& data,
                              std::span<const std::size_t> rows);
Eigen::MatrixXd predict_basis(const Ensemble& e, const Dataset& data);

/// Predictions of any model with predict(span) over selected rows.
template <class Model>
Eigen::VectorXd predict_rows(const Model& model, const Dataset& data,
                             std::span<const std::size_t> rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = model.predict(data.row(rows[i]));
    }
    return out;
}

/// Mean squared error of predictions against the response at rows.
double mse(const Eigen::VectorXd& predictions, const Dataset& data, std::span<const std::size_t> rows);

}  // namespace isle

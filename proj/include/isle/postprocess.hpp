#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isle/dataset.hpp"
#include "isle/ensemble.hpp"

namespace isle {

// Penalized least squares over the tree basis:
//
//   sum_i (y_i - b0 - sum_m beta_m B_im)^2
//     + lambda * sum_m (alpha * beta_m^2 + (1 - alpha) * w_m * |beta_m|)
//
// The loss is the plain (unhalved, unaveraged) residual sum of squares, so
// lambda grows with the number of rows. alpha weights the QUADRATIC term.
// w_m = 1 for the non-adaptive kinds; adaptive kinds use |pilot_m|^-gamma.
// The intercept b0 is never penalized.

enum class PenaltyKind { lasso, adaptive_lasso, elastic_net, adaptive_elastic_net };

std::string to_string(PenaltyKind kind);
/// Accepts the long names above and the short forms lasso/alasso/enet/aenet.
PenaltyKind penalty_kind_from_string(const std::string& name);
std::string short_name(PenaltyKind kind);
bool is_adaptive(PenaltyKind kind);
bool uses_alpha(PenaltyKind kind);

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::lasso;
    double lambda = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    /// Per-coefficient L1 weights; empty means all ones. +inf excludes the coefficient.
    std::vector<double> adaptive_weights;

    double weight(std::size_t m) const { return adaptive_weights.empty() ? 1.0 : adaptive_weights[m]; }
    void validate(std::size_t n_coefficients) const;
};

/// Column centering and scaling applied before solving. Constant columns
/// keep scale 1 and are flagged; their coefficients are pinned to zero.
struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<bool> constant;

    bool empty() const { return mean.empty(); }
};

struct StandardizedBasis {
    Eigen::MatrixXd matrix;
    Standardization standardization;
};

struct CdOptions {
    double tol = 1e-7;            ///< on the largest coefficient change in a full sweep
    std::size_t max_iter = 10000; ///< sweeps
    /// After convergence, re-solve the stationarity equations on the active
    /// set; the result is kept only if it satisfies the optimality conditions.
    bool polish = true;
    /// If positive, replaces tol: stop when max_m <b_m, b_m> dbeta_m^2 falls
    /// below deviance_tol * sum (y - ybar)^2 (scale-free).
    double deviance_tol = 0.0;
    /// deviance_tol used for intermediate path fits (CV folds, warm-up steps).
    double path_deviance_tol = 1e-7;
};

struct PilotFit {
    PenaltySpec spec;
    Eigen::VectorXd coefficients;  ///< standardized scale
};

struct PenalizedFit {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;  ///< scale of the caller's basis columns
    double standardized_intercept = 0.0;
    Eigen::VectorXd standardized_coefficients;
    PenaltySpec spec;
    Standardization standardization;  ///< empty when the solver ran on the caller's basis directly
    double objective_value = 0.0;     ///< evaluated on the solver's (standardized) basis
    bool converged = true;
    bool polished = false;
    bool degenerate = false;  ///< adaptive stage with every coefficient excluded
    std::size_t iterations = 0;
    std::size_t n_train = 0;
    std::optional<PilotFit> pilot;

    std::size_t nonzero() const;
};

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

/// Columns centered to mean 0 and scaled to population standard deviation 1.
/// Columns with standard deviation <= 1e-12 are only centered and flagged.
StandardizedBasis standardize_basis(const Eigen::MatrixXd& basis);

/// Applies a stored standardization to new rows.
Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& basis, const Standardization& st);

/// The penalized objective at (intercept, coefficients) on basis B.
double penalized_objective(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double intercept,
                           const Eigen::VectorXd& coefficients, const PenaltySpec& spec);

/// Cyclic coordinate descent with the intercept profiled out: columns and y
/// are centered internally, so the update for coordinate m is
///   beta_m <- S(2 <r_{-m}, b_m>, lambda (1-alpha) w_m) / (2 <b_m, b_m> + 2 lambda alpha).
/// Holds the centered basis and its Gram matrix so a path can be solved with
/// warm starts; each coordinate update then costs O(M) rather than O(N).
class CoordinateDescent {
public:
    CoordinateDescent(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y);

    PenalizedFit solve(const PenaltySpec& spec, const Eigen::VectorXd* warm_start,
                       const CdOptions& options) const;

    /// Smallest lambda whose solution is all zero, for this alpha and weights.
    double lambda_max(double alpha, std::span<const double> weights) const;

    std::size_t n_rows() const { return static_cast<std::size_t>(centered_.rows()); }
    std::size_t n_columns() const { return static_cast<std::size_t>(centered_.cols()); }
    bool pinned(std::size_t m) const { return column_pinned_[m]; }

private:
    bool try_polish(const PenaltySpec& spec, Eigen::VectorXd& beta) const;
    double objective(const Eigen::VectorXd& beta, const PenaltySpec& spec) const;

    Eigen::MatrixXd centered_;
    Eigen::VectorXd y_centered_;
    Eigen::VectorXd column_mean_;
    Eigen::VectorXd column_norm2_;
    Eigen::MatrixXd gram_;           ///< centered' * centered
    Eigen::VectorXd cross_;          ///< centered' * y_centered
    std::vector<bool> column_pinned_;
    double y_mean_ = 0.0;
};

PenalizedFit coordinate_descent(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y,
                                const PenaltySpec& spec, const Eigen::VectorXd* warm_start = nullptr,
                                const CdOptions& options = {});

/// n_lambdas values log-spaced from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_path(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y,
                                const PenaltySpec& spec, std::size_t n_lambdas, double ratio);

/// |pilot_m|^-gamma; +inf where pilot_m == 0 and gamma > 0; all ones when gamma == 0.
std::vector<double> adaptive_weights(const Eigen::VectorXd& pilot, double gamma);

struct CvGrid {
    std::vector<double> lambdas;  ///< explicit values; empty selects a path per (alpha, gamma)
    std::size_t n_lambdas = 100;
    double lambda_ratio = 1e-3;
    std::vector<double> alphas{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<double> gammas{0.5, 1.0, 2.0};
};

struct CvRow {
    PenaltyKind kind = PenaltyKind::lasso;
    double lambda = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double mean_mse = 0.0;
    double sd_mse = 0.0;
};

struct CvResult {
    PenaltySpec best;
    std::vector<CvRow> table;
    PenalizedFit fit;  ///< refit on all rows at `best`
    double best_mse = 0.0;
};

/// k-fold selection of (lambda, alpha, gamma). alpha is only searched for
/// elastic-net kinds and gamma only for adaptive kinds (which need `pilot`,
/// standardized-scale coefficients). Ties go to larger lambda, then smaller
/// alpha, then smaller gamma.
CvResult cv_select(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, PenaltyKind kind,
                   const CvGrid& grid, std::size_t k, std::uint64_t seed,
                   const Eigen::VectorXd* pilot = nullptr, const CdOptions& options = {});

/// Two-stage adaptive fit: CV-tuned pilot (lasso or elastic net), then the
/// reweighted problem with its own CV. The pilot is recorded in fit.pilot.
CvResult fit_adaptive(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, PenaltyKind kind,
                      const CvGrid& grid, std::size_t k, std::uint64_t seed,
                      const CdOptions& options = {});

/// Columns: kind,lambda,alpha,gamma,mean_mse,sd_mse.
void write_cv_table_csv(const std::vector<CvRow>& table, std::ostream& out);

struct PostConfig {
    CvGrid grid;
    std::size_t folds = 5;
    CdOptions cd;
};

/// Ensemble plus a penalized linear fit over its raw trees. Coefficients are
/// on the raw tree-output scale.
class PostProcessedModel {
public:
    PostProcessedModel() = default;
    PostProcessedModel(std::shared_ptr<const Ensemble> ensemble, PenalizedFit fit);

    double predict(std::span<const double> x) const;

    const Ensemble& ensemble() const { return *ensemble_; }
    std::shared_ptr<const Ensemble> ensemble_ptr() const { return ensemble_; }
    const PenalizedFit& fit() const { return fit_; }

    std::vector<CvRow> cv_table;
    double cv_mse = 0.0;

private:
    std::shared_ptr<const Ensemble> ensemble_;
    PenalizedFit fit_;
};

/// Basis -> standardize -> CV selection (two-stage for adaptive kinds).
PostProcessedModel post_process(std::shared_ptr<const Ensemble> ensemble, const Dataset& data,
                                std::span<const std::size_t> rows, PenaltyKind kind,
                                const PostConfig& config, std::uint64_t seed);

/// Penalty hyperparameters carried from a tuned fit to refits on other row
/// sets. lambda is stored per training row and rescaled by the refit's row
/// count, since the loss is a sum over rows.
struct FrozenPenalty {
    PenaltyKind kind = PenaltyKind::lasso;
    double lambda_per_row = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double pilot_lambda_per_row = 0.0;
    double pilot_alpha = 0.0;
};

FrozenPenalty freeze(const PenalizedFit& fit);

/// Fits at frozen hyperparameters (no CV) on the given rows.
PostProcessedModel refit_frozen(std::shared_ptr<const Ensemble> ensemble, const Dataset& data,
                                std::span<const std::size_t> rows, const FrozenPenalty& frozen,
                                const CdOptions& options = {});

}  // namespace isle

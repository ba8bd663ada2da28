#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "isle/dataset.hpp"

namespace isle {

/// A fitted model reduced to its prediction function.
using Predictor = std::function<double(std::span<const double>)>;

/// Fits on the given rows of a dataset. Must be deterministic in (rows, seed).
using FitProcedure =
    std::function<Predictor(const Dataset&, std::span<const std::size_t> rows, std::uint64_t seed)>;

struct CandidateModel {
    std::string label;
    FitProcedure fit;
    std::string hyperparameters;  ///< frozen settings, for reporting only
};

enum class ArmDensity { gaussian };

struct ArmConfig {
    std::size_t n_outer = 20;
    ArmDensity density = ArmDensity::gaussian;
    /// Floor on sigma-hat. Non-positive means 1e-8 times the response
    /// standard deviation over the rows being mixed.
    double min_sigma = 0.0;
};

struct ArmWeights {
    std::vector<std::string> labels;
    std::vector<double> weights;
    Eigen::MatrixXd per_iteration_shares;  ///< n_outer x J, rows sum to 1
};

/// Raised when a candidate's fit procedure throws; names the candidate.
class ArmFitError : public std::runtime_error {
public:
    ArmFitError(const std::string& label, const std::string& what)
        : std::runtime_error("ARM candidate '" + label + "' failed: " + what), label_(label) {}
    const std::string& label() const { return label_; }

private:
    std::string label_;
};

/// max(min_sigma, root mean squared validation residual).
double arm_variance(std::span<const double> y_val, std::span<const double> pred_val, double min_sigma);

/// log e_j = sum_i [log phi((y_i - pred_i) / sigma) - log sigma], phi the standard normal density.
double arm_log_score(std::span<const double> y_eval, std::span<const double> pred_eval, double sigma);

/// exp(s_j - logsumexp(s)); shift invariant in s.
std::vector<double> normalized_shares(std::span<const double> log_scores);

/// Repeated three-way splits of `rows`: fit on z1, sigma-hat from z2, log
/// score on z3, shares accumulated and averaged. Every candidate in outer
/// iteration t receives the same fit seed mix_seed(seed, t).
ArmWeights arm_weights(std::span<const CandidateModel> models, const Dataset& data,
                       std::span<const std::size_t> rows, const ArmConfig& config, std::uint64_t seed);

/// sum_j w_j * predictor_j(x) with predictors refit on the full rows.
double arm_predict(std::span<const Predictor> predictors, const ArmWeights& weights,
                   std::span<const double> x);

/// Columns: label, weight, then one share column per outer iteration.
void write_arm_weights_csv(const ArmWeights& weights, std::ostream& out);

}  // namespace isle

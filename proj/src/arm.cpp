#include "isle/arm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>

#include "isle/rng.hpp"

namespace isle {

namespace {

// log(1 / sqrt(2 pi))
constexpr double kLogNormalConst = -0.91893853320467274178;

double response_sd(const Dataset& data, std::span<const std::size_t> rows) {
    double mean = 0.0;
    for (auto i : rows) mean += data.response(i);
    mean /= static_cast<double>(rows.size());
    double ss = 0.0;
    for (auto i : rows) ss += (data.response(i) - mean) * (data.response(i) - mean);
    return std::sqrt(ss / static_cast<double>(rows.size()));
}

}  // namespace

double arm_variance(std::span<const double> y_val, std::span<const double> pred_val, double min_sigma) {
    if (y_val.size() != pred_val.size()) throw std::invalid_argument("arm_variance: length mismatch");
    if (y_val.empty()) throw std::invalid_argument("arm_variance: empty validation part");
    double ss = 0.0;
    for (std::size_t i = 0; i < y_val.size(); ++i) {
        const double r = y_val[i] - pred_val[i];
        ss += r * r;
    }
    return std::max(min_sigma, std::sqrt(ss / static_cast<double>(y_val.size())));
}

double arm_log_score(std::span<const double> y_eval, std::span<const double> pred_eval, double sigma) {
    if (y_eval.size() != pred_eval.size()) throw std::invalid_argument("arm_log_score: length mismatch");
    if (y_eval.empty()) throw std::invalid_argument("arm_log_score: empty evaluation part");
    if (!(sigma > 0.0)) throw std::invalid_argument("arm_log_score: sigma must be positive");
    const double log_sigma = std::log(sigma);
    double score = 0.0;
    for (std::size_t i = 0; i < y_eval.size(); ++i) {
        const double z = (y_eval[i] - pred_eval[i]) / sigma;
        score += kLogNormalConst - 0.5 * z * z - log_sigma;
    }
    return score;
}

std::vector<double> normalized_shares(std::span<const double> log_scores) {
    if (log_scores.empty()) throw std::invalid_argument("normalized_shares: no scores");
    const double top = *std::max_element(log_scores.begin(), log_scores.end());
    if (!std::isfinite(top)) throw std::invalid_argument("normalized_shares: no finite log score");
    std::vector<double> shares(log_scores.size());
    double total = 0.0;
    for (std::size_t j = 0; j < shares.size(); ++j) {
        shares[j] = std::exp(log_scores[j] - top);
        total += shares[j];
    }
    for (auto& s : shares) s /= total;
    return shares;
}

ArmWeights arm_weights(std::span<const CandidateModel> models, const Dataset& data,
                       std::span<const std::size_t> rows, const ArmConfig& config, std::uint64_t seed) {
    if (models.empty()) throw std::invalid_argument("arm_weights: no candidate models");
    if (config.n_outer < 1) throw std::invalid_argument("arm_weights: n_outer must be >= 1");
    const std::size_t n_models = models.size();
    const double min_sigma =
        config.min_sigma > 0.0 ? config.min_sigma : 1e-8 * response_sd(data, rows);
    // A constant response gives a zero floor; fall back to the smallest normal double.
    const double floor = min_sigma > 0.0 ? min_sigma : std::numeric_limits<double>::min();

    ArmWeights out;
    for (const auto& m : models) out.labels.push_back(m.label);
    out.per_iteration_shares.resize(static_cast<Eigen::Index>(config.n_outer),
                                    static_cast<Eigen::Index>(n_models));
    Rng split_rng(seed);
    std::vector<double> log_scores(n_models);
    std::vector<double> y2, y3, p2, p3;
    for (std::size_t t = 0; t < config.n_outer; ++t) {
        const auto parts = three_way_split(rows.size(), split_rng);
        const auto z1 = take(rows, parts.z1);
        const auto z2 = take(rows, parts.z2);
        const auto z3 = take(rows, parts.z3);
        const auto fit_seed = mix_seed(seed, t);
        y2.clear();
        y3.clear();
        for (auto i : z2) y2.push_back(data.response(i));
        for (auto i : z3) y3.push_back(data.response(i));
        for (std::size_t j = 0; j < n_models; ++j) {
            Predictor predictor;
            try {
                predictor = models[j].fit(data, z1, fit_seed);
            } catch (const std::exception& e) {
                throw ArmFitError(models[j].label, e.what());
            }
            p2.clear();
            p3.clear();
            for (auto i : z2) p2.push_back(predictor(data.row(i)));
            for (auto i : z3) p3.push_back(predictor(data.row(i)));
            const double sigma = arm_variance(y2, p2, floor);
            log_scores[j] = arm_log_score(y3, p3, sigma);
        }
        const auto shares = normalized_shares(log_scores);
        for (std::size_t j = 0; j < n_models; ++j) {
            out.per_iteration_shares(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = shares[j];
        }
    }
    out.weights.resize(n_models);
    for (std::size_t j = 0; j < n_models; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < config.n_outer; ++t) {
            acc += out.per_iteration_shares(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j));
        }
        out.weights[j] = acc / static_cast<double>(config.n_outer);
    }
    return out;
}

double arm_predict(std::span<const Predictor> predictors, const ArmWeights& weights,
                   std::span<const double> x) {
    if (predictors.size() != weights.weights.size()) {
        throw std::invalid_argument("arm_predict: " + std::to_string(predictors.size()) +
                                    " predictors for " + std::to_string(weights.weights.size()) +
                                    " weights");
    }
    double out = 0.0;
    for (std::size_t j = 0; j < predictors.size(); ++j) {
        if (weights.weights[j] != 0.0) out += weights.weights[j] * predictors[j](x);
    }
    return out;
}

void write_arm_weights_csv(const ArmWeights& weights, std::ostream& out) {
    const auto precision = out.precision(17);
    out << "label,weight";
    for (Eigen::Index t = 0; t < weights.per_iteration_shares.rows(); ++t) out << ",share_" << t + 1;
    out << '\n';
    for (std::size_t j = 0; j < weights.labels.size(); ++j) {
        out << weights.labels[j] << ',' << weights.weights[j];
        for (Eigen::Index t = 0; t < weights.per_iteration_shares.rows(); ++t) {
            out << ',' << weights.per_iteration_shares(t, static_cast<Eigen::Index>(j));
        }
        out << '\n';
    }
    out.precision(precision);
}

}  // namespace isle

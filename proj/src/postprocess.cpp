#include "isle/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace isle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kConstantSd = 1e-12;

}  // namespace

std::string to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::adaptive_lasso: return "adaptive_lasso";
        case PenaltyKind::elastic_net: return "elastic_net";
        case PenaltyKind::adaptive_elastic_net: return "adaptive_elastic_net";
    }
    throw std::invalid_argument("unknown penalty kind");
}

std::string short_name(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::adaptive_lasso: return "alasso";
        case PenaltyKind::elastic_net: return "enet";
        case PenaltyKind::adaptive_elastic_net: return "aenet";
    }
    throw std::invalid_argument("unknown penalty kind");
}

PenaltyKind penalty_kind_from_string(const std::string& name) {
    if (name == "lasso") return PenaltyKind::lasso;
    if (name == "alasso" || name == "adaptive_lasso") return PenaltyKind::adaptive_lasso;
    if (name == "enet" || name == "elastic_net") return PenaltyKind::elastic_net;
    if (name == "aenet" || name == "adaptive_elastic_net") return PenaltyKind::adaptive_elastic_net;
    throw std::invalid_argument("unknown penalty '" + name + "'");
}

bool is_adaptive(PenaltyKind kind) {
    return kind == PenaltyKind::adaptive_lasso || kind == PenaltyKind::adaptive_elastic_net;
}

bool uses_alpha(PenaltyKind kind) {
    return kind == PenaltyKind::elastic_net || kind == PenaltyKind::adaptive_elastic_net;
}

void PenaltySpec::validate(std::size_t n_coefficients) const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("PenaltySpec: lambda must be finite and >= 0");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("PenaltySpec: alpha must lie in [0, 1]");
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("PenaltySpec: gamma must be finite and >= 0");
    if (is_adaptive(kind) && adaptive_weights.empty()) {
        throw std::invalid_argument("PenaltySpec: adaptive kinds need adaptive weights");
    }
    if (!adaptive_weights.empty()) {
        if (adaptive_weights.size() != n_coefficients) {
            throw std::invalid_argument("PenaltySpec: one adaptive weight per coefficient required");
        }
        for (double w : adaptive_weights) {
            if (!(w > 0.0)) throw std::invalid_argument("PenaltySpec: adaptive weights must be positive or +inf");
        }
    }
}

std::size_t PenalizedFit::nonzero() const {
    return static_cast<std::size_t>((coefficients.array() != 0.0).count());
}

StandardizedBasis standardize_basis(const Eigen::MatrixXd& basis) {
    const auto n = basis.rows();
    if (n < 2) throw std::invalid_argument("standardize_basis: need at least two rows");
    StandardizedBasis out;
    out.matrix.resize(n, basis.cols());
    auto& st = out.standardization;
    for (Eigen::Index m = 0; m < basis.cols(); ++m) {
        const double mean = basis.col(m).mean();
        const double sd = std::sqrt((basis.col(m).array() - mean).square().sum() / static_cast<double>(n));
        const bool constant = !(sd > kConstantSd);
        const double scale = constant ? 1.0 : sd;
        out.matrix.col(m) = (basis.col(m).array() - mean) / scale;
        st.mean.push_back(mean);
        st.scale.push_back(scale);
        st.constant.push_back(constant);
    }
    return out;
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& basis, const Standardization& st) {
    if (static_cast<std::size_t>(basis.cols()) != st.mean.size()) {
        throw std::invalid_argument("apply_standardization: column count mismatch");
    }
    Eigen::MatrixXd out(basis.rows(), basis.cols());
    for (Eigen::Index m = 0; m < basis.cols(); ++m) {
        const auto j = static_cast<std::size_t>(m);
        out.col(m) = (basis.col(m).array() - st.mean[j]) / st.scale[j];
    }
    return out;
}

namespace {

double penalty_value(const Eigen::VectorXd& beta, const PenaltySpec& spec) {
    double pen = 0.0;
    for (Eigen::Index m = 0; m < beta.size(); ++m) {
        const double b = beta(m);
        if (b == 0.0) continue;
        pen += spec.alpha * b * b + (1.0 - spec.alpha) * spec.weight(static_cast<std::size_t>(m)) * std::abs(b);
    }
    return spec.lambda * pen;
}

}  // namespace

double penalized_objective(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, double intercept,
                           const Eigen::VectorXd& coefficients, const PenaltySpec& spec) {
    const Eigen::VectorXd r = (y - basis * coefficients).array() - intercept;
    return r.squaredNorm() + penalty_value(coefficients, spec);
}

CoordinateDescent::CoordinateDescent(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y) {
    if (basis.rows() != y.size()) {
        throw std::invalid_argument("coordinate_descent: basis has " + std::to_string(basis.rows()) +
                                    " rows but y has " + std::to_string(y.size()));
    }
    if (basis.rows() < 1) throw std::invalid_argument("coordinate_descent: no rows");
    const double n = static_cast<double>(basis.rows());
    column_mean_ = basis.colwise().mean().transpose();
    centered_ = basis.rowwise() - column_mean_.transpose();
    y_mean_ = y.mean();
    y_centered_ = y.array() - y_mean_;
    gram_.noalias() = centered_.transpose() * centered_;
    cross_.noalias() = centered_.transpose() * y_centered_;
    column_norm2_ = gram_.diagonal();
    column_pinned_.resize(static_cast<std::size_t>(basis.cols()));
    for (Eigen::Index m = 0; m < basis.cols(); ++m) {
        column_pinned_[static_cast<std::size_t>(m)] =
            !(std::sqrt(column_norm2_(m) / n) > kConstantSd);
    }
}

double CoordinateDescent::objective(const Eigen::VectorXd& beta, const PenaltySpec& spec) const {
    return (y_centered_ - centered_ * beta).squaredNorm() + penalty_value(beta, spec);
}

double CoordinateDescent::lambda_max(double alpha, std::span<const double> weights) const {
    if (!(alpha >= 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("lambda_max: alpha must lie in [0, 1) for a finite lambda_max");
    }
    const Eigen::VectorXd grad = 2.0 * cross_;
    double best = -1.0;
    for (std::size_t m = 0; m < n_columns(); ++m) {
        const double w = weights.empty() ? 1.0 : weights[m];
        if (column_pinned_[m] || !std::isfinite(w)) continue;
        best = std::max(best, std::abs(grad(static_cast<Eigen::Index>(m))) / ((1.0 - alpha) * w));
    }
    if (best < 0.0) throw std::invalid_argument("lambda_max: every column is constant or excluded");
    return best;
}

bool CoordinateDescent::try_polish(const PenaltySpec& spec, Eigen::VectorXd& beta) const {
    std::vector<Eigen::Index> active;
    for (Eigen::Index m = 0; m < beta.size(); ++m) {
        if (beta(m) != 0.0) active.push_back(m);
    }
    if (active.empty()) return false;
    const auto a = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd cols(centered_.rows(), a);
    Eigen::VectorXd l1(a);
    for (Eigen::Index j = 0; j < a; ++j) {
        cols.col(j) = centered_.col(active[static_cast<std::size_t>(j)]);
        const auto m = static_cast<std::size_t>(active[static_cast<std::size_t>(j)]);
        l1(j) = spec.lambda * (1.0 - spec.alpha) * spec.weight(m) *
                (beta(active[static_cast<std::size_t>(j)]) > 0.0 ? 1.0 : -1.0);
    }
    Eigen::MatrixXd hessian = 2.0 * cols.transpose() * cols;
    hessian.diagonal().array() += 2.0 * spec.lambda * spec.alpha;
    const Eigen::VectorXd rhs = 2.0 * cols.transpose() * y_centered_ - l1;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    if (ldlt.info() != Eigen::Success) return false;
    const Eigen::VectorXd x = ldlt.solve(rhs);
    if (!x.allFinite()) return false;
    if ((hessian * x - rhs).norm() > 1e-10 * (hessian.norm() * x.norm() + rhs.norm())) return false;

    Eigen::VectorXd candidate = Eigen::VectorXd::Zero(beta.size());
    for (Eigen::Index j = 0; j < a; ++j) {
        const auto m = active[static_cast<std::size_t>(j)];
        if (x(j) == 0.0 || (x(j) > 0.0) != (beta(m) > 0.0)) return false;
        candidate(m) = x(j);
    }
    const Eigen::VectorXd r = y_centered_ - cols * x;
    const double r_norm = r.norm();
    for (Eigen::Index m = 0; m < beta.size(); ++m) {
        const auto mm = static_cast<std::size_t>(m);
        if (candidate(m) != 0.0 || column_pinned_[mm] || !std::isfinite(spec.weight(mm))) continue;
        const double bound = spec.lambda * (1.0 - spec.alpha) * spec.weight(mm);
        const double g = 2.0 * std::abs(centered_.col(m).dot(r));
        if (g > bound * (1.0 + 1e-9) + 1e-12 * std::sqrt(column_norm2_(m)) * r_norm) return false;
    }
    const double before = objective(beta, spec);
    const double after = objective(candidate, spec);
    if (after > before + 1e-12 * std::abs(before)) return false;
    beta = std::move(candidate);
    return true;
}

PenalizedFit CoordinateDescent::solve(const PenaltySpec& spec, const Eigen::VectorXd* warm_start,
                                      const CdOptions& options) const {
    const std::size_t n_cols = n_columns();
    spec.validate(n_cols);
    if (!(options.tol > 0.0)) throw std::invalid_argument("coordinate_descent: tol must be positive");
    if (!(options.deviance_tol >= 0.0)) throw std::invalid_argument("coordinate_descent: deviance_tol must be >= 0");

    std::vector<bool> excluded(n_cols);
    std::vector<double> l1(n_cols), denom(n_cols);
    for (std::size_t m = 0; m < n_cols; ++m) {
        const double w = spec.weight(m);
        excluded[m] = column_pinned_[m] || !std::isfinite(w);
        l1[m] = excluded[m] ? 0.0 : spec.lambda * (1.0 - spec.alpha) * w;
        denom[m] = 2.0 * column_norm2_(static_cast<Eigen::Index>(m)) + 2.0 * spec.lambda * spec.alpha;
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cols));
    if (warm_start) {
        if (static_cast<std::size_t>(warm_start->size()) != n_cols) {
            throw std::invalid_argument("coordinate_descent: warm start has the wrong length");
        }
        beta = *warm_start;
        for (std::size_t m = 0; m < n_cols; ++m) {
            if (excluded[m]) beta(static_cast<Eigen::Index>(m)) = 0.0;
        }
    }
    // grad = centered' * residual, kept current through the Gram matrix.
    Eigen::VectorXd grad = cross_;
    for (Eigen::Index m = 0; m < beta.size(); ++m) {
        if (beta(m) != 0.0) grad.noalias() -= beta(m) * gram_.col(m);
    }

    // Change measure compared against tol: |dbeta|, or its deviance-scaled
    // square when the scale-free rule is on.
    const bool scaled = options.deviance_tol > 0.0;
    const double tol = scaled ? options.deviance_tol * y_centered_.squaredNorm() : options.tol;
    auto update = [&](std::size_t m) {
        const auto mi = static_cast<Eigen::Index>(m);
        const double old = beta(mi);
        const double z = 2.0 * (grad(mi) + column_norm2_(mi) * old);
        const double fresh = soft_threshold(z, l1[m]) / denom[m];
        const double delta = fresh - old;
        if (delta != 0.0) {
            grad.noalias() -= delta * gram_.col(mi);
            beta(mi) = fresh;
        }
        return scaled ? column_norm2_(mi) * delta * delta : std::abs(delta);
    };

    PenalizedFit fit;
    std::size_t sweeps = 0;
    bool converged = false;
    while (sweeps < options.max_iter) {
        double change = 0.0;
        for (std::size_t m = 0; m < n_cols; ++m) {
            if (!excluded[m]) change = std::max(change, update(m));
        }
        ++sweeps;
        if (change < tol) {
            converged = true;
            break;
        }
        // Cycle on the nonzero coordinates until they settle, then re-check all.
        std::vector<std::size_t> active;
        for (std::size_t m = 0; m < n_cols; ++m) {
            if (beta(static_cast<Eigen::Index>(m)) != 0.0) active.push_back(m);
        }
        while (sweeps < options.max_iter) {
            double active_change = 0.0;
            for (auto m : active) active_change = std::max(active_change, update(m));
            ++sweeps;
            if (active_change < tol) break;
        }
    }

    if (converged && options.polish) fit.polished = try_polish(spec, beta);

    fit.spec = spec;
    fit.converged = converged;
    fit.iterations = sweeps;
    fit.n_train = n_rows();
    fit.coefficients = beta;
    fit.standardized_coefficients = beta;
    fit.intercept = y_mean_ - column_mean_.dot(beta);
    fit.standardized_intercept = fit.intercept;
    fit.objective_value = objective(beta, spec);
    return fit;
}

PenalizedFit coordinate_descent(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y,
                                const PenaltySpec& spec, const Eigen::VectorXd* warm_start,
                                const CdOptions& options) {
    return CoordinateDescent(basis, y).solve(spec, warm_start, options);
}

namespace {

std::vector<double> log_spaced(double top, std::size_t n, double ratio) {
    std::vector<double> path(n);
    for (std::size_t i = 0; i < n; ++i) {
        path[i] = top * std::pow(ratio, static_cast<double>(i) / static_cast<double>(n - 1));
    }
    path.front() = top;
    path.back() = top * ratio;
    return path;
}

std::vector<double> path_for(const CoordinateDescent& cd, const PenaltySpec& spec,
                             std::size_t n_lambdas, double ratio) {
    if (n_lambdas < 2) throw std::invalid_argument("lambda_path: need at least two values");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("lambda_path: ratio must lie in (0, 1)");
    const double top = cd.lambda_max(spec.alpha, spec.adaptive_weights);
    if (!(top > 0.0)) throw std::invalid_argument("lambda_path: response is uncorrelated with every column");
    return log_spaced(top, n_lambdas, ratio);
}

bool all_excluded(const std::vector<double>& weights) {
    return !weights.empty() &&
           std::all_of(weights.begin(), weights.end(), [](double w) { return !std::isfinite(w); });
}

// Solves at spec.lambda after walking down a short geometric path from
// lambda_max; cold starts at small lambda on correlated bases are slow.
PenalizedFit solve_with_path(const CoordinateDescent& cd, const PenaltySpec& spec,
                             const CdOptions& options) {
    if (all_excluded(spec.adaptive_weights) || spec.alpha >= 1.0) {
        return cd.solve(spec, nullptr, options);
    }
    double top = 0.0;
    try {
        top = cd.lambda_max(spec.alpha, spec.adaptive_weights);
    } catch (const std::invalid_argument&) {
        return cd.solve(spec, nullptr, options);
    }
    CdOptions quick = options;
    quick.polish = false;
    quick.deviance_tol = options.path_deviance_tol;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cd.n_columns()));
    if (top > spec.lambda && spec.lambda > 0.0) {
        const std::size_t steps = 10;
        const double ratio = spec.lambda / top;
        for (std::size_t i = 1; i < steps; ++i) {
            PenaltySpec step = spec;
            step.lambda = top * std::pow(ratio, static_cast<double>(i) / static_cast<double>(steps));
            warm = cd.solve(step, &warm, quick).coefficients;
        }
    }
    return cd.solve(spec, &warm, options);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const IndexList& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& v, const IndexList& rows) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(rows[i]));
    return out;
}

bool better(const CvRow& a, const CvRow& b) {
    if (a.mean_mse != b.mean_mse) return a.mean_mse < b.mean_mse;
    if (a.lambda != b.lambda) return a.lambda > b.lambda;
    if (a.alpha != b.alpha) return a.alpha < b.alpha;
    return a.gamma < b.gamma;
}

PenaltyKind pilot_kind(PenaltyKind kind) {
    return kind == PenaltyKind::adaptive_lasso ? PenaltyKind::lasso : PenaltyKind::elastic_net;
}

}  // namespace

std::vector<double> lambda_path(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y,
                                const PenaltySpec& spec, std::size_t n_lambdas, double ratio) {
    CoordinateDescent cd(basis, y);
    spec.validate(cd.n_columns());
    return path_for(cd, spec, n_lambdas, ratio);
}

std::vector<double> adaptive_weights(const Eigen::VectorXd& pilot, double gamma) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("adaptive_weights: gamma must be >= 0");
    std::vector<double> w(static_cast<std::size_t>(pilot.size()), 1.0);
    if (gamma == 0.0) return w;
    for (Eigen::Index m = 0; m < pilot.size(); ++m) {
        const double b = std::abs(pilot(m));
        w[static_cast<std::size_t>(m)] = b == 0.0 ? kInf : std::pow(b, -gamma);
    }
    return w;
}

CvResult cv_select(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, PenaltyKind kind,
                   const CvGrid& grid, std::size_t k, std::uint64_t seed,
                   const Eigen::VectorXd* pilot, const CdOptions& options) {
    if (basis.rows() != y.size()) throw std::invalid_argument("cv_select: basis/response size mismatch");
    if (k < 2) throw std::invalid_argument("cv_select: k must be >= 2");
    if (is_adaptive(kind) && !pilot) throw std::invalid_argument("cv_select: adaptive kinds need pilot coefficients");
    if (pilot && pilot->size() != basis.cols()) throw std::invalid_argument("cv_select: pilot length mismatch");

    const std::vector<double> alphas = uses_alpha(kind) ? grid.alphas : std::vector<double>{0.0};
    const std::vector<double> gammas = is_adaptive(kind) ? grid.gammas : std::vector<double>{0.0};
    if (alphas.empty() || gammas.empty()) throw std::invalid_argument("cv_select: empty grid");
    if (grid.lambdas.empty() && grid.n_lambdas < 2) throw std::invalid_argument("cv_select: empty lambda grid");

    const auto n = static_cast<std::size_t>(y.size());
    Rng rng(seed);
    const auto folds = kfold_indices(n, k, rng);
    std::vector<CoordinateDescent> fold_solvers;
    std::vector<Eigen::MatrixXd> fold_val_basis;
    std::vector<Eigen::VectorXd> fold_val_y;
    for (const auto& fold : folds) {
        fold_solvers.emplace_back(take_rows(basis, fold.train), take_rows(y, fold.train));
        fold_val_basis.push_back(take_rows(basis, fold.test));
        fold_val_y.push_back(take_rows(y, fold.test));
    }
    const CoordinateDescent full(basis, y);
    CdOptions path_options = options;
    path_options.polish = false;
    path_options.deviance_tol = options.path_deviance_tol;

    CvResult result;
    std::vector<std::vector<double>> lambdas_of_combo;
    std::vector<PenaltySpec> spec_of_row;
    for (double gamma : gammas) {
        for (double alpha : alphas) {
            PenaltySpec spec;
            spec.kind = kind;
            spec.alpha = alpha;
            spec.gamma = gamma;
            if (is_adaptive(kind)) spec.adaptive_weights = adaptive_weights(*pilot, gamma);
            spec.validate(static_cast<std::size_t>(basis.cols()));

            std::vector<double> lambdas;
            if (all_excluded(spec.adaptive_weights)) {
                lambdas = {0.0};
            } else if (!grid.lambdas.empty()) {
                lambdas = grid.lambdas;
                std::sort(lambdas.begin(), lambdas.end(), std::greater<>());
            } else {
                lambdas = path_for(full, spec, grid.n_lambdas, grid.lambda_ratio);
            }

            std::vector<std::vector<double>> fold_mse(lambdas.size(), std::vector<double>(k));
            for (std::size_t f = 0; f < k; ++f) {
                Eigen::VectorXd warm = Eigen::VectorXd::Zero(basis.cols());
                for (std::size_t l = 0; l < lambdas.size(); ++l) {
                    spec.lambda = lambdas[l];
                    const auto fit = fold_solvers[f].solve(spec, &warm, path_options);
                    warm = fit.coefficients;
                    const Eigen::VectorXd resid =
                        (fold_val_y[f] - fold_val_basis[f] * fit.coefficients).array() - fit.intercept;
                    fold_mse[l][f] = resid.squaredNorm() / static_cast<double>(resid.size());
                }
            }
            for (std::size_t l = 0; l < lambdas.size(); ++l) {
                CvRow row{kind, lambdas[l], alpha, gamma, 0.0, 0.0};
                for (double v : fold_mse[l]) row.mean_mse += v;
                row.mean_mse /= static_cast<double>(k);
                double ss = 0.0;
                for (double v : fold_mse[l]) ss += (v - row.mean_mse) * (v - row.mean_mse);
                row.sd_mse = std::sqrt(ss / static_cast<double>(k - 1));
                result.table.push_back(row);
                spec.lambda = lambdas[l];
                spec_of_row.push_back(spec);
            }
            lambdas_of_combo.push_back(std::move(lambdas));
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.table.size(); ++i) {
        if (better(result.table[i], result.table[best])) best = i;
    }
    result.best = spec_of_row[best];
    result.best_mse = result.table[best].mean_mse;

    // Refit on all rows, warm-starting down the same lambda sequence.
    const auto& chosen = result.best;
    std::size_t combo = 0, offset = 0;
    while (offset + lambdas_of_combo[combo].size() <= best) offset += lambdas_of_combo[combo++].size();
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(basis.cols());
    for (std::size_t l = 0; l + offset < best; ++l) {
        PenaltySpec step = chosen;
        step.lambda = lambdas_of_combo[combo][l];
        warm = full.solve(step, &warm, path_options).coefficients;
    }
    result.fit = full.solve(chosen, &warm, options);
    return result;
}

CvResult fit_adaptive(const Eigen::MatrixXd& basis, const Eigen::VectorXd& y, PenaltyKind kind,
                      const CvGrid& grid, std::size_t k, std::uint64_t seed, const CdOptions& options) {
    if (!is_adaptive(kind)) throw std::invalid_argument("fit_adaptive: kind must be adaptive");
    for (double g : grid.gammas) {
        if (!(g >= 0.0)) throw std::invalid_argument("fit_adaptive: gamma must be >= 0");
    }
    const auto pilot = cv_select(basis, y, pilot_kind(kind), grid, k, seed, nullptr, options);
    const Eigen::VectorXd pilot_coef = pilot.fit.coefficients;
    auto result = cv_select(basis, y, kind, grid, k, seed, &pilot_coef, options);
    result.fit.pilot = PilotFit{pilot.best, pilot_coef};
    result.fit.degenerate = (pilot_coef.array() == 0.0).all();
    return result;
}

void write_cv_table_csv(const std::vector<CvRow>& table, std::ostream& out) {
    const auto precision = out.precision(17);
    out << "kind,lambda,alpha,gamma,mean_mse,sd_mse\n";
    for (const auto& row : table) {
        out << to_string(row.kind) << ',' << row.lambda << ',' << row.alpha << ',' << row.gamma << ','
            << row.mean_mse << ',' << row.sd_mse << '\n';
    }
    out.precision(precision);
}

namespace {

void to_original_scale(PenalizedFit& fit, const Standardization& st) {
    fit.standardization = st;
    fit.standardized_coefficients = fit.coefficients;
    fit.standardized_intercept = fit.intercept;
    double intercept = fit.intercept;
    for (Eigen::Index m = 0; m < fit.coefficients.size(); ++m) {
        const auto j = static_cast<std::size_t>(m);
        const double b = fit.standardized_coefficients(m);
        if (b == 0.0) {
            fit.coefficients(m) = 0.0;
            continue;
        }
        fit.coefficients(m) = b / st.scale[j];
        intercept -= b * st.mean[j] / st.scale[j];
    }
    fit.intercept = intercept;
}

}  // namespace

PostProcessedModel::PostProcessedModel(std::shared_ptr<const Ensemble> ensemble, PenalizedFit fit)
    : ensemble_(std::move(ensemble)), fit_(std::move(fit)) {
    if (!ensemble_) throw std::invalid_argument("PostProcessedModel: null ensemble");
    if (static_cast<std::size_t>(fit_.coefficients.size()) != ensemble_->size()) {
        throw std::invalid_argument("PostProcessedModel: coefficient count " +
                                    std::to_string(fit_.coefficients.size()) +
                                    " does not match tree count " + std::to_string(ensemble_->size()));
    }
}

double PostProcessedModel::predict(std::span<const double> x) const {
    double out = fit_.intercept;
    const auto& trees = ensemble_->trees();
    for (std::size_t m = 0; m < trees.size(); ++m) {
        const double b = fit_.coefficients(static_cast<Eigen::Index>(m));
        if (b != 0.0) out += b * trees[m].predict(x);
    }
    return out;
}

PostProcessedModel post_process(std::shared_ptr<const Ensemble> ensemble, const Dataset& data,
                                std::span<const std::size_t> rows, PenaltyKind kind,
                                const PostConfig& config, std::uint64_t seed) {
    if (!ensemble) throw std::invalid_argument("post_process: null ensemble");
    const auto basis = standardize_basis(predict_basis(*ensemble, data, rows));
    const Eigen::VectorXd y = data.response_at(rows);
    auto result = is_adaptive(kind)
                      ? fit_adaptive(basis.matrix, y, kind, config.grid, config.folds, seed, config.cd)
                      : cv_select(basis.matrix, y, kind, config.grid, config.folds, seed, nullptr, config.cd);
    to_original_scale(result.fit, basis.standardization);
    PostProcessedModel model(std::move(ensemble), std::move(result.fit));
    model.cv_table = std::move(result.table);
    model.cv_mse = result.best_mse;
    return model;
}

FrozenPenalty freeze(const PenalizedFit& fit) {
    if (fit.n_train == 0) throw std::invalid_argument("freeze: fit has no training-row count");
    const double n = static_cast<double>(fit.n_train);
    FrozenPenalty frozen;
    frozen.kind = fit.spec.kind;
    frozen.lambda_per_row = fit.spec.lambda / n;
    frozen.alpha = fit.spec.alpha;
    frozen.gamma = fit.spec.gamma;
    if (fit.pilot) {
        frozen.pilot_lambda_per_row = fit.pilot->spec.lambda / n;
        frozen.pilot_alpha = fit.pilot->spec.alpha;
    }
    return frozen;
}

PostProcessedModel refit_frozen(std::shared_ptr<const Ensemble> ensemble, const Dataset& data,
                                std::span<const std::size_t> rows, const FrozenPenalty& frozen,
                                const CdOptions& options) {
    if (!ensemble) throw std::invalid_argument("refit_frozen: null ensemble");
    const auto basis = standardize_basis(predict_basis(*ensemble, data, rows));
    const Eigen::VectorXd y = data.response_at(rows);
    const CoordinateDescent cd(basis.matrix, y);
    const double n = static_cast<double>(rows.size());

    PenaltySpec spec;
    spec.kind = frozen.kind;
    spec.lambda = frozen.lambda_per_row * n;
    spec.alpha = frozen.alpha;
    spec.gamma = frozen.gamma;
    std::optional<PilotFit> pilot;
    if (is_adaptive(frozen.kind)) {
        PenaltySpec pilot_spec;
        pilot_spec.kind = pilot_kind(frozen.kind);
        pilot_spec.lambda = frozen.pilot_lambda_per_row * n;
        pilot_spec.alpha = frozen.pilot_alpha;
        const auto pilot_fit = solve_with_path(cd, pilot_spec, options);
        pilot = PilotFit{pilot_spec, pilot_fit.coefficients};
        spec.adaptive_weights = adaptive_weights(pilot_fit.coefficients, frozen.gamma);
    }
    auto fit = solve_with_path(cd, spec, options);
    fit.pilot = pilot;
    fit.degenerate = pilot && (pilot->coefficients.array() == 0.0).all();
    to_original_scale(fit, basis.standardization);
    return PostProcessedModel(std::move(ensemble), std::move(fit));
}

}  // namespace isle

#include "isle/ensemble.hpp"

#include <cmath>
#include <stdexcept>

namespace isle {

std::string to_string(Loss loss) {
    switch (loss) {
        case Loss::squared_error: return "squared_error";
    }
    throw std::invalid_argument("unknown loss");
}

std::string to_string(EnsembleMode mode) {
    return mode == EnsembleMode::mart ? "mart" : "rf";
}

Loss loss_from_string(const std::string& name) {
    if (name == "squared_error") return Loss::squared_error;
    throw std::invalid_argument("unsupported loss '" + name + "'");
}

EnsembleMode mode_from_string(const std::string& name) {
    if (name == "mart") return EnsembleMode::mart;
    if (name == "rf") return EnsembleMode::rf;
    throw std::invalid_argument("unknown ensemble mode '" + name + "'");
}

void EnsembleParams::validate(std::size_t n_features) const {
    if (n_trees < 1) throw std::invalid_argument("EnsembleParams: n_trees must be >= 1");
    if (!(subsample_fraction > 0.0 && subsample_fraction <= 1.0)) {
        throw std::invalid_argument("EnsembleParams: subsample_fraction must lie in (0, 1]");
    }
    if (mode == EnsembleMode::mart && !(shrinkage > 0.0 && shrinkage <= 1.0)) {
        throw std::invalid_argument("EnsembleParams: MART shrinkage must lie in (0, 1]");
    }
    if (mode == EnsembleMode::rf && shrinkage != 0.0) {
        throw std::invalid_argument("EnsembleParams: RF mode requires shrinkage 0");
    }
    tree.validate(n_features);
}

std::size_t EnsembleParams::default_tree_count(std::size_t n_rows, EnsembleMode mode) {
    if (mode == EnsembleMode::mart) return n_rows < 1000 ? 100 : 250;
    return n_rows < 1000 ? 200 : 500;
}

EnsembleParams EnsembleParams::mart_isle(std::size_t n_rows) {
    EnsembleParams params;
    params.n_trees = default_tree_count(n_rows, EnsembleMode::mart);
    params.shrinkage = 0.01;
    params.subsample_fraction = 0.2;
    params.tree.max_depth = 2;
    params.tree.min_samples_leaf = 1;
    params.mode = EnsembleMode::mart;
    return params;
}

EnsembleParams EnsembleParams::rf_isle(std::size_t n_rows, std::size_t n_features) {
    EnsembleParams params;
    params.n_trees = default_tree_count(n_rows);
    params.shrinkage = 0.0;
    params.subsample_fraction = 0.4;
    params.tree.max_depth = 2;
    params.tree.min_samples_leaf = 5;
    params.tree.feature_subsample =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n_features) / 3.0)));
    params.mode = EnsembleMode::rf;
    return params;
}

Ensemble::Ensemble(double f0, std::vector<RegressionTree> trees, double shrinkage, EnsembleMode mode)
    : f0_(f0), trees_(std::move(trees)), shrinkage_(shrinkage), mode_(mode) {}

double Ensemble::predict(std::span<const double> x) const {
    if (trees_.empty()) return f0_;
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.predict(x);
    if (mode_ == EnsembleMode::rf) return sum / static_cast<double>(trees_.size());
    return f0_ + shrinkage_ * sum;
}

double fit_f0(std::span<const double> y, Loss loss) {
    if (y.empty()) throw std::invalid_argument("fit_f0: empty response");
    switch (loss) {
        case Loss::squared_error: {
            double sum = 0.0;
            for (double v : y) sum += v;
            return sum / static_cast<double>(y.size());
        }
    }
    throw std::invalid_argument("fit_f0: unsupported loss");
}

std::vector<double> negative_gradient(std::span<const double> y, std::span<const double> f, Loss loss) {
    if (y.size() != f.size()) throw std::invalid_argument("negative_gradient: length mismatch");
    std::vector<double> g(y.size());
    switch (loss) {
        case Loss::squared_error:
            for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] - f[i];
            return g;
    }
    throw std::invalid_argument("negative_gradient: unsupported loss");
}

IndexList subsample(std::size_t n, double eta, Rng& rng) {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("subsample: eta must lie in (0, 1]");
    const auto size = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * eta)));
    auto perm = rng.permutation(n);
    perm.resize(std::min(size, n));
    return perm;
}

RegressionTree fit_terminal_gammas(const RegressionTree& tree, const Dataset& data,
                                   std::span<const std::size_t> rows, std::span<const double> y,
                                   std::span<const double> f_prev, Loss loss) {
    if (rows.size() != y.size() || rows.size() != f_prev.size()) {
        throw std::invalid_argument("fit_terminal_gammas: rows, y and f_prev must align");
    }
    const auto& nodes = tree.nodes();
    std::vector<double> sums(nodes.size(), 0.0);
    std::vector<std::size_t> counts(nodes.size(), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto leaf = tree.leaf_index(data.row(rows[i]));
        switch (loss) {
            case Loss::squared_error: sums[leaf] += y[i] - f_prev[i]; break;
        }
        ++counts[leaf];
    }
    std::vector<double> gammas(nodes.size(), 0.0);
    for (std::size_t j = 0; j < nodes.size(); ++j) {
        if (!nodes[j].is_leaf()) continue;
        if (counts[j] == 0) {
            throw std::logic_error("fit_terminal_gammas: leaf " + std::to_string(j) +
                                   " received no subsample points");
        }
        gammas[j] = sums[j] / static_cast<double>(counts[j]);
    }
    return tree.with_leaf_values(gammas);
}

Ensemble generate_ensemble(const Dataset& data, std::span<const std::size_t> rows,
                           const EnsembleParams& params) {
    params.validate(data.n_features());
    if (rows.empty()) throw std::invalid_argument("generate_ensemble: no training rows");

    const std::size_t n = rows.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = data.response(rows[i]);
    const double f0 = fit_f0(y, params.loss);
    std::vector<double> fit(n, f0);

    std::vector<RegressionTree> trees;
    trees.reserve(params.n_trees);
    std::vector<std::size_t> sub_rows;
    std::vector<double> sub_y, sub_f;
    for (std::size_t m = 0; m < params.n_trees; ++m) {
        Rng rng(mix_seed(params.seed, m));
        const auto positions = subsample(n, params.subsample_fraction, rng);
        sub_rows.resize(positions.size());
        sub_y.resize(positions.size());
        sub_f.resize(positions.size());
        for (std::size_t i = 0; i < positions.size(); ++i) {
            sub_rows[i] = rows[positions[i]];
            sub_y[i] = y[positions[i]];
            sub_f[i] = fit[positions[i]];
        }

        if (params.mode == EnsembleMode::rf) {
            trees.push_back(fit_tree(data, sub_rows, sub_y, params.tree, rng));
            continue;
        }

        const auto pseudo = negative_gradient(sub_y, sub_f, params.loss);
        auto tree = fit_tree(data, sub_rows, pseudo, params.tree, rng);
        tree = fit_terminal_gammas(tree, data, sub_rows, sub_y, sub_f, params.loss);
        for (std::size_t i = 0; i < n; ++i) fit[i] += params.shrinkage * tree.predict(data.row(rows[i]));
        trees.push_back(std::move(tree));
    }
    return Ensemble(f0, std::move(trees), params.shrinkage, params.mode);
}

Ensemble generate_ensemble(const Dataset& data, const EnsembleParams& params) {
    const auto rows = all_rows(data.n_rows());
    return generate_ensemble(data, rows, params);
}

Eigen::MatrixXd predict_basis(const Ensemble& e, const Dataset& data,
                              std::span<const std::size_t> rows) {
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(e.size()));
    for (std::size_t m = 0; m < e.size(); ++m) {
        const auto& tree = e.trees()[m];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m)) =
                tree.predict(data.row(rows[i]));
        }
    }
    return basis;
}

Eigen::MatrixXd predict_basis(const Ensemble& e, const Dataset& data) {
    const auto rows = all_rows(data.n_rows());
    return predict_basis(e, data, rows);
}

double mse(const Eigen::VectorXd& predictions, const Dataset& data, std::span<const std::size_t> rows) {
    if (static_cast<std::size_t>(predictions.size()) != rows.size()) {
        throw std::invalid_argument("mse: one prediction per row required");
    }
    if (rows.empty()) throw std::invalid_argument("mse: no rows");
    double sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double r = data.response(rows[i]) - predictions(static_cast<Eigen::Index>(i));
        sum += r * r;
    }
    return sum / static_cast<double>(rows.size());
}

}  // namespace isle

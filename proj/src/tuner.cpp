#include "isle/tuner.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <limits>
#include <tuple>

namespace isle {

TuningGrid TuningGrid::defaults(std::size_t n_features) {
    TuningGrid grid;
    const std::size_t p = n_features;
    for (std::size_t divisor : {5u, 3u, 2u, 1u}) {
        const std::size_t m = std::max<std::size_t>(1, (p + divisor - 1) / divisor);
        if (std::find(grid.rf_m_grid.begin(), grid.rf_m_grid.end(), m) == grid.rf_m_grid.end()) {
            grid.rf_m_grid.push_back(m);
        }
    }
    return grid;
}

EnsembleParams rf_tuned_base(std::size_t n_rows, std::size_t n_features) {
    EnsembleParams params;
    params.mode = EnsembleMode::rf;
    params.n_trees = EnsembleParams::default_tree_count(n_rows);
    params.shrinkage = 0.0;
    params.subsample_fraction = 0.5;
    params.tree.min_samples_leaf = 5;
    params.tree.feature_subsample = std::max<std::size_t>(1, n_features / 3);
    return params;
}

EnsembleParams mart_tuned_base() {
    EnsembleParams params;
    params.mode = EnsembleMode::mart;
    params.subsample_fraction = 0.5;
    params.tree.min_samples_leaf = 1;
    return params;
}

namespace {

auto simplicity_key(const EnsembleParams& p) {
    return std::make_tuple(p.n_trees, p.tree.max_depth.value_or(std::numeric_limits<std::size_t>::max()),
                           p.shrinkage, p.tree.feature_subsample.value_or(0));
}

}  // namespace

TuningResult tune(const Dataset& data, std::span<const std::size_t> rows, EnsembleMode kind,
                  const TuningGrid& grid, std::size_t k, std::uint64_t seed) {
    std::vector<EnsembleParams> points;
    if (kind == EnsembleMode::rf) {
        if (grid.rf_m_grid.empty()) throw std::invalid_argument("tune: empty RF grid");
        for (auto m : grid.rf_m_grid) {
            auto params = rf_tuned_base(rows.size(), data.n_features());
            params.tree.feature_subsample = m;
            points.push_back(params);
        }
    } else {
        if (grid.mart_depth_grid.empty() || grid.mart_m_grid.empty() || grid.mart_nu_grid.empty()) {
            throw std::invalid_argument("tune: empty MART grid");
        }
        for (auto depth : grid.mart_depth_grid) {
            for (auto n_trees : grid.mart_m_grid) {
                for (auto nu : grid.mart_nu_grid) {
                    auto params = mart_tuned_base();
                    params.tree.max_depth = depth;
                    params.n_trees = n_trees;
                    params.shrinkage = nu;
                    points.push_back(params);
                }
            }
        }
    }
    for (auto& params : points) {
        params.seed = mix_seed(seed, 1);
        params.validate(data.n_features());
    }

    Rng fold_rng(seed);
    const auto folds = kfold_indices(rows.size(), k, fold_rng);

    TuningResult result;
    for (const auto& params : points) {
        double total = 0.0;
        for (const auto& fold : folds) {
            const auto train = take(rows, fold.train);
            const auto test = take(rows, fold.test);
            const auto ensemble = generate_ensemble(data, train, params);
            total += mse(predict_rows(ensemble, data, test), data, test);
        }
        result.cv_table.push_back({params, total / static_cast<double>(folds.size())});
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < result.cv_table.size(); ++i) {
        const auto& a = result.cv_table[i];
        const auto& b = result.cv_table[best];
        if (a.mean_mse < b.mean_mse ||
            (a.mean_mse == b.mean_mse && simplicity_key(a.params) < simplicity_key(b.params))) {
            best = i;
        }
    }
    result.best_params = result.cv_table[best].params;
    return result;
}

void write_tuning_table_csv(const TuningResult& result, std::ostream& out) {
    const auto precision = out.precision(17);
    out << "mode,n_trees,max_depth,shrinkage,feature_subsample,mean_mse\n";
    for (const auto& row : result.cv_table) {
        const auto& p = row.params;
        out << to_string(p.mode) << ',' << p.n_trees << ',';
        if (p.tree.max_depth) out << *p.tree.max_depth;
        out << ',' << p.shrinkage << ',';
        if (p.tree.feature_subsample) out << *p.tree.feature_subsample;
        out << ',' << row.mean_mse << '\n';
    }
    out.precision(precision);
}

}  // namespace isle

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "isle/dataset.hpp"
#include "isle/ensemble.hpp"

namespace isle {

struct TuningGrid {
    std::vector<std::size_t> rf_m_grid;
    std::vector<std::size_t> mart_depth_grid{2, 4, 6};
    std::vector<std::size_t> mart_m_grid{100, 300};
    std::vector<double> mart_nu_grid{0.01, 0.1};

    /// RF m in {ceil(p/5), ceil(p/3), ceil(p/2), p} (deduplicated) plus the MART defaults.
    static TuningGrid defaults(std::size_t n_features);
};

struct TuningRow {
    EnsembleParams params;
    double mean_mse = 0.0;
};

struct TuningResult {
    EnsembleParams best_params;
    std::vector<TuningRow> cv_table;
};

/// Fully grown forest trees (min leaf 5, 50% subsamples) with m features per split.
EnsembleParams rf_tuned_base(std::size_t n_rows, std::size_t n_features);
/// Boosting with 50% subsamples; depth, tree count and shrinkage come from the grid.
EnsembleParams mart_tuned_base();

/// Exhaustive k-fold grid search over `rows`. Every fold of every grid point
/// uses the same folds and the same ensemble seed. Ties in mean MSE go to
/// fewer trees, then shallower trees, then smaller shrinkage, then smaller m.
TuningResult tune(const Dataset& data, std::span<const std::size_t> rows, EnsembleMode kind,
                  const TuningGrid& grid, std::size_t k, std::uint64_t seed);

/// Columns: mode,n_trees,max_depth,shrinkage,feature_subsample,mean_mse.
void write_tuning_table_csv(const TuningResult& result, std::ostream& out);

}  // namespace isle

#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "isle/dataset.hpp"
#include "isle/tree.hpp"

namespace isle::testing {

/// Exhaustive greedy tree: at every node, every feature and every midpoint
/// is scored by directly summed child SSE. Stops on depth, leaf size or zero
/// gain. Returns the leaf id of every row (positions into `rows`).
class GreedyOracle {
public:
    GreedyOracle(const Dataset& data, const IndexList& rows, const std::vector<double>& y,
                 std::size_t max_depth, std::size_t min_leaf)
        : data_(data), rows_(rows), y_(y), max_depth_(max_depth), min_leaf_(min_leaf) {}

    std::vector<int> leaf_of_rows() {
        std::vector<int> leaf(rows_.size(), -1);
        std::vector<std::size_t> all(rows_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        grow(all, 0, leaf);
        return leaf;
    }

private:
    static double sse(const std::vector<double>& v) {
        if (v.empty()) return 0.0;
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return s;
    }

    void grow(const std::vector<std::size_t>& members, std::size_t depth, std::vector<int>& leaf) {
        std::vector<double> ys;
        for (auto i : members) ys.push_back(y_[i]);
        const double parent = sse(ys);
        const double tie = kGainTieTolerance * parent;

        bool found = false;
        std::size_t best_j = 0;
        double best_t = 0.0, best_gain = 0.0;
        if (depth < max_depth_) {
            for (std::size_t j = 0; j < data_.n_features(); ++j) {
                std::map<double, int> distinct;
                for (auto i : members) distinct[data_.feature(rows_[i], j)] = 1;
                std::vector<double> values;
                for (const auto& kv : distinct) values.push_back(kv.first);
                for (std::size_t k = 0; k + 1 < values.size(); ++k) {
                    const double t = values[k] + (values[k + 1] - values[k]) / 2.0;
                    std::vector<double> l, r;
                    for (auto i : members) (data_.feature(rows_[i], j) <= t ? l : r).push_back(y_[i]);
                    if (l.size() < min_leaf_ || r.size() < min_leaf_) continue;
                    const double gain = parent - sse(l) - sse(r);
                    if (!found || gain > best_gain + tie) {
                        found = true;
                        best_j = j;
                        best_t = t;
                        best_gain = gain;
                    }
                }
            }
        }
        if (!found || best_gain <= tie) {
            for (auto i : members) leaf[i] = next_leaf_;
            ++next_leaf_;
            return;
        }
        std::vector<std::size_t> l, r;
        for (auto i : members) (data_.feature(rows_[i], best_j) <= best_t ? l : r).push_back(i);
        grow(l, depth + 1, leaf);
        grow(r, depth + 1, leaf);
    }

    const Dataset& data_;
    const IndexList& rows_;
    const std::vector<double>& y_;
    std::size_t max_depth_;
    std::size_t min_leaf_;
    int next_leaf_ = 0;
};

/// SSE of a row partition, summed in row order, so two equal partitions
/// give bit-identical values.
inline double partition_sse(const std::vector<int>& leaf, const std::vector<double>& y) {
    std::map<int, std::pair<double, double>> sums;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sums[leaf[i]].first += y[i];
        sums[leaf[i]].second += 1.0;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto& [total, count] = sums[leaf[i]];
        const double r = y[i] - total / count;
        s += r * r;
    }
    return s;
}

/// Leaf ids renumbered by first appearance, for comparing partitions.
inline std::vector<int> canonical(const std::vector<int>& leaf) {
    std::map<int, int> ids;
    std::vector<int> out;
    for (int l : leaf) {
        auto it = ids.find(l);
        if (it == ids.end()) it = ids.emplace(l, static_cast<int>(ids.size())).first;
        out.push_back(it->second);
    }
    return out;
}

inline std::vector<int> tree_partition(const RegressionTree& tree, const Dataset& data, const IndexList& rows) {
    std::vector<int> leaf;
    for (auto r : rows) leaf.push_back(static_cast<int>(tree.leaf_index(data.row(r))));
    return leaf;
}

}  // namespace isle::testing

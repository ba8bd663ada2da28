#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "isle/dataset.hpp"
#include "isle/rng.hpp"

namespace isle {

/// Growth limits for a regression tree. Unset optionals mean "unlimited"
/// (or "all features" for feature_subsample).
struct TreeParams {
    std::optional<std::size_t> max_depth;
    std::size_t min_samples_leaf = 1;
    std::optional<std::size_t> max_terminal_nodes;
    std::optional<std::size_t> feature_subsample;

    /// Throws std::invalid_argument when a value is out of range for p features.
    void validate(std::size_t n_features) const;

    bool operator==(const TreeParams&) const = default;
};

struct SplitCandidate {
    std::size_t feature = 0;
    double threshold = 0.0;
    double sse_reduction = 0.0;
};

/// Relative tolerance (w.r.t. the node's SSE) under which two split gains
/// are treated as tied and a gain is treated as zero.
inline constexpr double kGainTieTolerance = 1e-12;

/// Best threshold for one feature. Thresholds are midpoints between
/// consecutive distinct sorted values; each side keeps at least
/// min_samples_leaf points; ties go to the smallest threshold. The returned
/// candidate's feature field is 0.
std::optional<SplitCandidate> best_split(std::span<const double> x_col, std::span<const double> y,
                                         std::size_t min_samples_leaf);

/// Binary regression tree with constant leaves. Routing: x[feature] <= threshold goes left.
class RegressionTree {
public:
    struct Node {
        // feature < 0 marks a leaf
        std::int32_t feature = -1;
        double threshold = 0.0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        double value = 0.0;
        std::size_t count = 0;

        bool is_leaf() const { return feature < 0; }
        bool operator==(const Node&) const = default;
    };

    RegressionTree() = default;
    /// Validates the layout: node 0 is the root, children indices are in
    /// range, every node is reachable exactly once.
    explicit RegressionTree(std::vector<Node> nodes);

    static RegressionTree constant(double value, std::size_t count);

    double predict(std::span<const double> x) const { return nodes_[leaf_index(x)].value; }
    std::size_t leaf_index(std::span<const double> x) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t n_leaves() const;
    std::size_t depth() const;

    /// Copy with leaf values replaced (values indexed by node id; entries of
    /// internal nodes are ignored).
    RegressionTree with_leaf_values(std::span<const double> values_by_node) const;

    bool operator==(const RegressionTree&) const = default;

private:
    std::vector<Node> nodes_;
};

/// Greedy squared-error tree on data rows `rows` with per-row targets
/// (targets[i] belongs to rows[i]). Nodes are expanded best-first by gain,
/// which only matters when max_terminal_nodes is finite. When
/// feature_subsample is set, every node draws a fresh feature subset.
RegressionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows,
                        std::span<const double> targets, const TreeParams& params, Rng& rng);

/// Training SSE of a tree over the given rows and targets.
double tree_sse(const RegressionTree& tree, const Dataset& data, std::span<const std::size_t> rows,
                std::span<const double> targets);

}  // namespace isle

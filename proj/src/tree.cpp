#include "isle/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace isle {

void TreeParams::validate(std::size_t n_features) const {
    if (min_samples_leaf < 1) throw std::invalid_argument("TreeParams: min_samples_leaf must be >= 1");
    if (max_terminal_nodes && *max_terminal_nodes < 2) {
        throw std::invalid_argument("TreeParams: max_terminal_nodes must be >= 2");
    }
    if (feature_subsample && (*feature_subsample < 1 || *feature_subsample > n_features)) {
        throw std::invalid_argument("TreeParams: feature_subsample " +
                                    std::to_string(*feature_subsample) + " outside [1, " +
                                    std::to_string(n_features) + "]");
    }
}

std::optional<SplitCandidate> best_split(std::span<const double> x_col, std::span<const double> y,
                                         std::size_t min_samples_leaf) {
    if (x_col.size() != y.size()) {
        throw std::invalid_argument("best_split: x and y lengths differ (" +
                                    std::to_string(x_col.size()) + " vs " +
                                    std::to_string(y.size()) + ")");
    }
    const std::size_t n = x_col.size();
    const std::size_t min_leaf = std::max<std::size_t>(min_samples_leaf, 1);
    if (n < 2 * min_leaf) return std::nullopt;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x_col[a] < x_col[b]; });
    if (x_col[order.front()] == x_col[order.back()]) return std::nullopt;

    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double parent_sse = 0.0;
    for (double v : y) parent_sse += (v - mean) * (v - mean);
    const double tie = kGainTieTolerance * parent_sse;

    // Gains from prefix sums of the centered response: SL^2/nL + SR^2/nR - S^2/n.
    double total = 0.0;
    for (double v : y) total += v - mean;
    const double base = total * total / static_cast<double>(n);

    std::optional<SplitCandidate> best;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += y[order[i]] - mean;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        const double lo = x_col[order[i]];
        const double hi = x_col[order[i + 1]];
        if (lo == hi || n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = total - left_sum;
        const double gain = std::max(0.0, left_sum * left_sum / static_cast<double>(n_left) +
                                              right_sum * right_sum / static_cast<double>(n_right) -
                                              base);
        if (!best || gain > best->sse_reduction + tie) {
            double threshold = lo + (hi - lo) / 2.0;
            if (!(threshold < hi)) threshold = lo;
            best = SplitCandidate{0, threshold, gain};
        }
    }
    return best;
}

RegressionTree::RegressionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw std::invalid_argument("RegressionTree: no nodes");
    std::vector<int> seen(nodes_.size(), 0);
    seen[0] = 1;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& node = nodes_[i];
        if (node.is_leaf()) continue;
        for (auto child : {node.left, node.right}) {
            if (child <= 0 || static_cast<std::size_t>(child) >= nodes_.size()) {
                throw std::invalid_argument("RegressionTree: child index out of range at node " +
                                            std::to_string(i));
            }
            if (seen[static_cast<std::size_t>(child)]++) {
                throw std::invalid_argument("RegressionTree: node " + std::to_string(child) +
                                            " has more than one parent");
            }
        }
        if (!std::isfinite(node.threshold)) {
            throw std::invalid_argument("RegressionTree: non-finite threshold");
        }
    }
    std::size_t reached = 0;
    std::vector<std::size_t> stack{0};
    while (!stack.empty() && reached <= nodes_.size()) {
        const auto i = stack.back();
        stack.pop_back();
        ++reached;
        if (!nodes_[i].is_leaf()) {
            stack.push_back(static_cast<std::size_t>(nodes_[i].left));
            stack.push_back(static_cast<std::size_t>(nodes_[i].right));
        }
    }
    if (reached != nodes_.size()) throw std::invalid_argument("RegressionTree: unreachable node");
}

RegressionTree RegressionTree::constant(double value, std::size_t count) {
    Node leaf;
    leaf.value = value;
    leaf.count = count;
    return RegressionTree({leaf});
}

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& node = nodes_[i];
        i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                         ? node.left
                                         : node.right);
    }
    return i;
}

std::size_t RegressionTree::n_leaves() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::size_t RegressionTree::depth() const {
    std::vector<std::size_t> level(nodes_.size(), 0);
    std::size_t deepest = 0;
    std::vector<std::size_t> stack{0};
    while (!stack.empty()) {
        const auto i = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, level[i]);
        if (!nodes_[i].is_leaf()) {
            for (auto c : {nodes_[i].left, nodes_[i].right}) {
                level[static_cast<std::size_t>(c)] = level[i] + 1;
                stack.push_back(static_cast<std::size_t>(c));
            }
        }
    }
    return deepest;
}

RegressionTree RegressionTree::with_leaf_values(std::span<const double> values_by_node) const {
    if (values_by_node.size() != nodes_.size()) {
        throw std::invalid_argument("with_leaf_values: one value per node required");
    }
    RegressionTree out = *this;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (out.nodes_[i].is_leaf()) out.nodes_[i].value = values_by_node[i];
    }
    return out;
}

namespace {

struct PendingNode {
    std::size_t node_id;
    std::vector<std::size_t> members;  // positions into rows/targets
    std::size_t depth;
    std::optional<SplitCandidate> split;
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, std::span<const std::size_t> rows,
                std::span<const double> targets, const TreeParams& params, Rng& rng)
        : data_(data), rows_(rows), targets_(targets), params_(params), rng_(rng) {
        features_.resize(data.n_features());
        std::iota(features_.begin(), features_.end(), std::size_t{0});
    }

    RegressionTree build() {
        std::vector<std::size_t> root_members(rows_.size());
        std::iota(root_members.begin(), root_members.end(), std::size_t{0});
        std::vector<PendingNode> frontier;
        add_node(std::move(root_members), 0, frontier);

        std::size_t n_leaves = 1;
        const std::size_t leaf_cap =
            params_.max_terminal_nodes.value_or(std::numeric_limits<std::size_t>::max());
        while (!frontier.empty() && n_leaves < leaf_cap) {
            // Largest gain first; ties keep the earliest-created node.
            std::size_t pick = 0;
            for (std::size_t i = 1; i < frontier.size(); ++i) {
                if (frontier[i].split->sse_reduction > frontier[pick].split->sse_reduction) pick = i;
            }
            PendingNode node = std::move(frontier[pick]);
            frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));

            const auto& split = *node.split;
            std::vector<std::size_t> left, right;
            for (auto pos : node.members) {
                (data_.feature(rows_[pos], split.feature) <= split.threshold ? left : right)
                    .push_back(pos);
            }
            nodes_[node.node_id].feature = static_cast<std::int32_t>(split.feature);
            nodes_[node.node_id].threshold = split.threshold;
            const auto left_id = add_node(std::move(left), node.depth + 1, frontier);
            const auto right_id = add_node(std::move(right), node.depth + 1, frontier);
            nodes_[node.node_id].left = static_cast<std::int32_t>(left_id);
            nodes_[node.node_id].right = static_cast<std::int32_t>(right_id);
            ++n_leaves;
        }
        return RegressionTree(std::move(nodes_));
    }

private:
    std::size_t add_node(std::vector<std::size_t> members, std::size_t depth,
                         std::vector<PendingNode>& frontier) {
        RegressionTree::Node node;
        node.count = members.size();
        double sum = 0.0;
        for (auto pos : members) sum += targets_[pos];
        node.value = sum / static_cast<double>(members.size());
        const std::size_t id = nodes_.size();
        nodes_.push_back(node);

        auto split = find_split(members, depth);
        if (split) frontier.push_back(PendingNode{id, std::move(members), depth, split});
        return id;
    }

    std::optional<SplitCandidate> find_split(const std::vector<std::size_t>& members,
                                             std::size_t depth) {
        if (params_.max_depth && depth >= *params_.max_depth) return std::nullopt;
        if (members.size() < 2 * params_.min_samples_leaf) return std::nullopt;

        std::vector<std::size_t> candidates;
        const std::size_t p = features_.size();
        if (params_.feature_subsample && *params_.feature_subsample < p) {
            // Partial Fisher-Yates: the first m entries are a uniform draw.
            std::vector<std::size_t> pool = features_;
            const std::size_t m = *params_.feature_subsample;
            for (std::size_t i = 0; i < m; ++i) {
                std::swap(pool[i], pool[i + rng_.uniform_index(p - i)]);
            }
            candidates.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
            std::sort(candidates.begin(), candidates.end());
        } else {
            candidates = features_;
        }

        y_buf_.resize(members.size());
        x_buf_.resize(members.size());
        double mean = 0.0;
        for (std::size_t i = 0; i < members.size(); ++i) {
            y_buf_[i] = targets_[members[i]];
            mean += y_buf_[i];
        }
        mean /= static_cast<double>(members.size());
        double parent_sse = 0.0;
        for (double v : y_buf_) parent_sse += (v - mean) * (v - mean);
        const double tie = kGainTieTolerance * parent_sse;

        std::optional<SplitCandidate> best;
        for (auto j : candidates) {
            for (std::size_t i = 0; i < members.size(); ++i) {
                x_buf_[i] = data_.feature(rows_[members[i]], j);
            }
            auto cand = best_split(x_buf_, y_buf_, params_.min_samples_leaf);
            if (!cand) continue;
            if (!best || cand->sse_reduction > best->sse_reduction + tie) {
                best = SplitCandidate{j, cand->threshold, cand->sse_reduction};
            }
        }
        if (!best || best->sse_reduction <= tie) return std::nullopt;
        return best;
    }

    const Dataset& data_;
    std::span<const std::size_t> rows_;
    std::span<const double> targets_;
    const TreeParams& params_;
    Rng& rng_;
    std::vector<std::size_t> features_;
    std::vector<RegressionTree::Node> nodes_;
    std::vector<double> x_buf_;
    std::vector<double> y_buf_;
};

}  // namespace

RegressionTree fit_tree(const Dataset& data, std::span<const std::size_t> rows,
                        std::span<const double> targets, const TreeParams& params, Rng& rng) {
    if (rows.empty()) throw std::invalid_argument("fit_tree: empty row list");
    if (rows.size() != targets.size()) {
        throw std::invalid_argument("fit_tree: one target per row required");
    }
    params.validate(data.n_features());
    for (double t : targets) {
        if (!std::isfinite(t)) throw std::invalid_argument("fit_tree: non-finite target");
    }
    return TreeBuilder(data, rows, targets, params, rng).build();
}

double tree_sse(const RegressionTree& tree, const Dataset& data, std::span<const std::size_t> rows,
                std::span<const double> targets) {
    double sse = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double r = targets[i] - tree.predict(data.row(rows[i]));
        sse += r * r;
    }
    return sse;
}

}  // namespace isle

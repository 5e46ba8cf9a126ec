#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "rampflow/common.hpp"

namespace rampflow::tree {

struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

class RegressionTree {
public:
    std::vector<Node> nodes;
    std::size_t n_features = 0;
    int max_depth = 1;
    int min_samples_leaf = 1;

    double predict(std::span<const double> x) const {
        if (x.size() != n_features) throw Error("predict_tree: feature count mismatch");
        int at = 0;
        while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const Node& node = nodes[static_cast<std::size_t>(at)];
            at = x[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
        }
        return nodes[static_cast<std::size_t>(at)].value;
    }
};

namespace detail {

struct SplitItem {
    double value;
    double y;
    double w;
};

struct BuildContext {
    const Table* X;
    const std::vector<double>* y;
    const std::vector<double>* w;
    int max_depth;
    int min_samples_leaf;
    std::vector<std::size_t> indices;
    std::vector<SplitItem> scratch;
    std::vector<Node> nodes;
};

inline double weighted_sse(double wsum, double wy, double wyy) {
    if (wsum <= 0.0) return 0.0;
    return std::max(0.0, wyy - wy * wy / wsum);
}

// Greedy top-down induction. Split candidates are midpoints between
// consecutive distinct sorted feature values; the argmax scans features in
// index order and thresholds ascending, so ties resolve to the lower
// feature index and smaller threshold.
inline int build_node(BuildContext& ctx, std::size_t lo, std::size_t hi, int depth) {
    const auto& X = *ctx.X;
    const auto& y = *ctx.y;
    const auto& w = *ctx.w;
    const std::size_t count = hi - lo;

    double wsum = 0.0, wy = 0.0, wyy = 0.0, ysum = 0.0;
    double ymin = std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = ctx.indices[k];
        wsum += w[i];
        wy += w[i] * y[i];
        wyy += w[i] * y[i] * y[i];
        ysum += y[i];
        ymin = std::min(ymin, y[i]);
        ymax = std::max(ymax, y[i]);
    }

    Node leaf;
    leaf.value = wsum > 0.0 ? wy / wsum : ysum / static_cast<double>(count);

    const bool pure = ymin == ymax;
    if (depth >= ctx.max_depth || pure || count < 2 * static_cast<std::size_t>(ctx.min_samples_leaf)) {
        ctx.nodes.push_back(leaf);
        return static_cast<int>(ctx.nodes.size() - 1);
    }

    const double parent_sse = weighted_sse(wsum, wy, wyy);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    auto& items = ctx.scratch;
    for (std::size_t j = 0; j < X.cols; ++j) {
        items.clear();
        for (std::size_t k = lo; k < hi; ++k) {
            const std::size_t i = ctx.indices[k];
            items.push_back({X.at(i, j), y[i], w[i]});
        }
        std::sort(items.begin(), items.end(),
                  [](const SplitItem& a, const SplitItem& b) { return a.value < b.value; });

        double lw = 0.0, lwy = 0.0, lwyy = 0.0;
        for (std::size_t k = 0; k + 1 < count; ++k) {
            lw += items[k].w;
            lwy += items[k].w * items[k].y;
            lwyy += items[k].w * items[k].y * items[k].y;
            if (!(items[k].value < items[k + 1].value)) continue;
            const std::size_t left_count = k + 1;
            const std::size_t right_count = count - left_count;
            if (left_count < static_cast<std::size_t>(ctx.min_samples_leaf) ||
                right_count < static_cast<std::size_t>(ctx.min_samples_leaf))
                continue;
            const double gain =
                parent_sse - weighted_sse(lw, lwy, lwyy) - weighted_sse(wsum - lw, wy - lwy, wyy - lwyy);
            // Relative floor keeps cancellation noise from minting splits.
            if (gain > best_gain && gain > 1e-12 * parent_sse) {
                best_gain = gain;
                best_feature = static_cast<int>(j);
                double mid = 0.5 * (items[k].value + items[k + 1].value);
                if (!(items[k].value < mid)) mid = items[k + 1].value;
                best_threshold = mid;
            }
        }
    }

    if (best_feature < 0) {
        ctx.nodes.push_back(leaf);
        return static_cast<int>(ctx.nodes.size() - 1);
    }

    auto mid_it = std::stable_partition(
        ctx.indices.begin() + static_cast<std::ptrdiff_t>(lo), ctx.indices.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](std::size_t i) { return X.at(i, static_cast<std::size_t>(best_feature)) < best_threshold; });
    const std::size_t mid = static_cast<std::size_t>(mid_it - ctx.indices.begin());

    Node split;
    split.feature = best_feature;
    split.threshold = best_threshold;
    split.value = leaf.value;
    ctx.nodes.push_back(split);
    const int node_id = static_cast<int>(ctx.nodes.size() - 1);
    const int left = build_node(ctx, lo, mid, depth + 1);
    const int right = build_node(ctx, mid, hi, depth + 1);
    ctx.nodes[static_cast<std::size_t>(node_id)].left = left;
    ctx.nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
}

}  // namespace detail

inline RegressionTree fit_tree(const Table& X, std::span<const double> y, std::span<const double> weights,
                               int max_depth, int min_samples_leaf = 1) {
    const std::size_t n = X.rows();
    if (n == 0) throw Error("fit_tree: empty input");
    if (y.size() != n || weights.size() != n) throw Error("fit_tree: size mismatch");
    if (max_depth < 1) throw Error("fit_tree: max_depth must be >= 1");
    double wsum = 0.0;
    for (double v : weights) {
        if (v < 0.0) throw Error("fit_tree: negative weight");
        wsum += v;
    }
    if (wsum <= 0.0) throw Error("fit_tree: weights sum to zero");

    detail::BuildContext ctx;
    std::vector<double> yv(y.begin(), y.end());
    std::vector<double> wv(weights.begin(), weights.end());
    ctx.X = &X;
    ctx.y = &yv;
    ctx.w = &wv;
    ctx.max_depth = max_depth;
    ctx.min_samples_leaf = min_samples_leaf;
    ctx.indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) ctx.indices[i] = i;
    ctx.scratch.reserve(n);
    ctx.nodes.reserve(64);
    detail::build_node(ctx, 0, n, 0);

    RegressionTree tree;
    tree.nodes = std::move(ctx.nodes);
    tree.n_features = X.cols;
    tree.max_depth = max_depth;
    tree.min_samples_leaf = min_samples_leaf;
    return tree;
}

inline double predict_tree(const RegressionTree& tree, std::span<const double> x) {
    return tree.predict(x);
}

}  // namespace rampflow::tree

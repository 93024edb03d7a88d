#pragma once

// Gradient-boosted regression trees with squared loss.
//
// Each stage fits a depth-limited tree to the current residuals by exact
// greedy search (thresholds halfway between consecutive distinct values) and
// adds learning_rate * tree to the running prediction. Leaves hold residual
// means, which makes every stage non-increasing in training MSE for
// learning_rate in (0, 1].

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace geonet {

struct RegressionTree {
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;   // x[feature] < threshold
        int right = -1;  // x[feature] >= threshold
        double value = 0.0;
    };
    std::vector<Node> nodes;

    double predict(std::span<const double> x) const {
        int i = 0;
        while (nodes[i].feature >= 0) i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }

    int depth() const { return depth_from(0); }

private:
    int depth_from(int i) const {
        if (nodes[i].feature < 0) return 0;
        return 1 + std::max(depth_from(nodes[i].left), depth_from(nodes[i].right));
    }
};

struct GbrtConfig {
    int n_iterations = 1000;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_samples_leaf = 1;
};

struct GbrtModel {
    std::vector<std::string> names;
    std::size_t n_features = 0;
    double init = 0.0;
    double learning_rate = 0.1;
    int n_iterations = 0;
    int max_depth = 3;
    std::vector<RegressionTree> trees;
    std::vector<double> train_mse;  // [s] = MSE with the first s trees; empty for loaded models
};

namespace detail {

class TreeBuilder {
public:
    TreeBuilder(const Eigen::MatrixXd& x, const std::vector<std::vector<int>>& sorted, int max_depth, int min_leaf)
        : x_(x), sorted_(sorted), max_depth_(max_depth), min_leaf_(min_leaf), node_of_(x.rows(), 0) {}

    RegressionTree build(const std::vector<double>& residual) {
        RegressionTree tree;
        std::fill(node_of_.begin(), node_of_.end(), 0);
        tree.nodes.push_back({});
        std::vector<int> frontier{0};
        leaf_mean(tree, residual, frontier);
        for (int level = 0; level < max_depth_ && !frontier.empty(); ++level) {
            std::vector<int> next;
            for (int node : frontier) {
                auto split = best_split(node, residual);
                if (split.feature < 0) continue;
                const int left = static_cast<int>(tree.nodes.size());
                tree.nodes.push_back({});
                tree.nodes.push_back({});
                auto& parent = tree.nodes[node];
                parent.feature = split.feature;
                parent.threshold = split.threshold;
                parent.left = left;
                parent.right = left + 1;
                for (Eigen::Index i = 0; i < x_.rows(); ++i)
                    if (node_of_[i] == node) node_of_[i] = x_(i, split.feature) < split.threshold ? left : left + 1;
                next.push_back(left);
                next.push_back(left + 1);
            }
            leaf_mean(tree, residual, next);
            frontier = std::move(next);
        }
        return tree;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
    };

    void leaf_mean(RegressionTree& tree, const std::vector<double>& r, const std::vector<int>& nodes) {
        for (int node : nodes) {
            double sum = 0.0;
            long count = 0;
            for (Eigen::Index i = 0; i < x_.rows(); ++i) {
                if (node_of_[i] == node) {
                    sum += r[i];
                    ++count;
                }
            }
            tree.nodes[node].value = count ? sum / static_cast<double>(count) : 0.0;
        }
    }

    Split best_split(int node, const std::vector<double>& r) const {
        double total = 0.0, total_sq = 0.0;
        long n = 0;
        for (Eigen::Index i = 0; i < x_.rows(); ++i) {
            if (node_of_[i] != node) continue;
            total += r[i];
            total_sq += r[i] * r[i];
            ++n;
        }
        Split best;
        if (n < 2 * min_leaf_) return best;
        const double parent = total * total / static_cast<double>(n);
        const double node_sse = total_sq - parent;
        double best_gain = 1e-12 * std::max(node_sse, 0.0);
        if (!(best_gain > 0.0)) return best;  // residuals already constant in this node
        for (int f = 0; f < static_cast<int>(x_.cols()); ++f) {
            double left_sum = 0.0;
            long left_n = 0;
            double prev_value = 0.0;
            bool have_prev = false;
            for (int i : sorted_[f]) {
                if (node_of_[i] != node) continue;
                const double v = x_(i, f);
                if (have_prev && v > prev_value && left_n >= min_leaf_ && n - left_n >= min_leaf_) {
                    const double right_sum = total - left_sum;
                    const double gain = left_sum * left_sum / static_cast<double>(left_n) +
                                        right_sum * right_sum / static_cast<double>(n - left_n) - parent;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best.feature = f;
                        best.threshold = prev_value + (v - prev_value) / 2.0;
                    }
                }
                left_sum += r[i];
                ++left_n;
                prev_value = v;
                have_prev = true;
            }
        }
        return best;
    }

    const Eigen::MatrixXd& x_;
    const std::vector<std::vector<int>>& sorted_;
    int max_depth_;
    int min_leaf_;
    std::vector<int> node_of_;
};

inline double row_mse(const std::vector<double>& residual) {
    double s = 0.0;
    for (double r : residual) s += r * r;
    return s / static_cast<double>(residual.size());
}

}  // namespace detail

inline GbrtModel fit_gbrt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbrtConfig& cfg = {},
                          std::vector<std::string> names = {}) {
    if (x.rows() != y.size()) throw std::invalid_argument("fit_gbrt: row count mismatch");
    if (x.rows() < 2) throw std::invalid_argument("fit_gbrt: need at least 2 rows");
    if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0))
        throw std::invalid_argument("fit_gbrt: learning_rate must be in (0, 1]");
    if (cfg.max_depth < 1 || cfg.n_iterations < 0 || cfg.min_samples_leaf < 1)
        throw std::invalid_argument("fit_gbrt: invalid configuration");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("fit_gbrt: non-finite input");

    const auto n = static_cast<std::size_t>(x.rows());
    GbrtModel model;
    model.names = std::move(names);
    model.n_features = static_cast<std::size_t>(x.cols());
    model.learning_rate = cfg.learning_rate;
    model.max_depth = cfg.max_depth;
    model.n_iterations = cfg.n_iterations;
    model.init = y.mean();

    std::vector<std::vector<int>> sorted(static_cast<std::size_t>(x.cols()), std::vector<int>(n));
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
        auto& order = sorted[static_cast<std::size_t>(f)];
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
    }

    std::vector<double> prediction(n, model.init);
    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = y(static_cast<Eigen::Index>(i)) - prediction[i];
    model.train_mse.push_back(detail::row_mse(residual));

    detail::TreeBuilder builder(x, sorted, cfg.max_depth, cfg.min_samples_leaf);
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (int it = 0; it < cfg.n_iterations; ++it) {
        auto tree = builder.build(residual);
        if (tree.nodes.size() == 1 && tree.nodes[0].value == 0.0) break;  // residuals are exactly zero
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < row.size(); ++k) row[k] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
            prediction[i] += cfg.learning_rate * tree.predict(row);
            residual[i] = y(static_cast<Eigen::Index>(i)) - prediction[i];
        }
        model.trees.push_back(std::move(tree));
        model.train_mse.push_back(detail::row_mse(residual));
    }
    return model;
}

// Sum of the first `stages` trees (all when stages < 0), accumulated in fit order.
inline double predict_staged(const GbrtModel& m, std::span<const double> x, long stages = -1) {
    if (x.size() != m.n_features)
        throw std::invalid_argument("predict: expected " + std::to_string(m.n_features) + " features, got " +
                                    std::to_string(x.size()));
    const std::size_t count = stages < 0 ? m.trees.size() : std::min(m.trees.size(), static_cast<std::size_t>(stages));
    double f = m.init;
    for (std::size_t t = 0; t < count; ++t) f += m.learning_rate * m.trees[t].predict(x);
    return f;
}

inline double predict(const GbrtModel& m, std::span<const double> x) { return predict_staged(m, x); }

}  // namespace geonet

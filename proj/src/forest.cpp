#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hed/classifiers.hpp"

namespace hed::detail {

namespace {

struct Candidate {
    int feature = -1;
    double threshold = 0.0;
    double impurity = std::numeric_limits<double>::infinity();
    std::size_t n_left = 0;
};

double gini_sum(const std::vector<double>& counts, double total) {
    if (total <= 0) return 0.0;
    double s = 0.0;
    for (double c : counts) s += c * c;
    return total - s / total; // total * gini
}

class TreeBuilder {
public:
    TreeBuilder(const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y, int n_classes,
                const ForestParams& params, Rng& rng)
        : X_(X), y_(y), n_classes_(n_classes), params_(params), rng_(rng) {
        const auto n_feat = static_cast<int>(X.cols());
        n_try_ = std::clamp(static_cast<int>(std::lround(params.max_features_fraction * n_feat)), 1, n_feat);
    }

    DecisionTree build(std::vector<std::size_t> samples) {
        struct Task {
            int node;
            int depth;
            std::vector<std::size_t> samples;
        };
        std::vector<Task> stack;
        stack.push_back({new_node(), 0, std::move(samples)});
        while (!stack.empty()) {
            Task task = std::move(stack.back());
            stack.pop_back();
            std::vector<double> counts(static_cast<std::size_t>(n_classes_), 0.0);
            for (auto s : task.samples) counts[static_cast<std::size_t>(y_[s])] += 1.0;
            const double total = static_cast<double>(task.samples.size());
            const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }) <= 1;
            const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));

            Candidate best;
            if (!pure && task.depth < params_.max_depth && task.samples.size() >= 2 * min_leaf) {
                best = best_split(task.samples, counts, min_leaf);
            }
            if (best.feature < 0) {
                for (int c = 0; c < n_classes_; ++c)
                    values_[static_cast<std::size_t>(task.node * n_classes_ + c)] = counts[static_cast<std::size_t>(c)] / total;
                continue;
            }

            std::vector<std::size_t> left, right;
            for (auto s : task.samples) (X_(static_cast<Eigen::Index>(s), best.feature) <= best.threshold ? left : right).push_back(s);
            const int l = new_node();
            const int r = new_node();
            tree_.feature[static_cast<std::size_t>(task.node)] = best.feature;
            tree_.threshold[static_cast<std::size_t>(task.node)] = best.threshold;
            tree_.left[static_cast<std::size_t>(task.node)] = l;
            tree_.right[static_cast<std::size_t>(task.node)] = r;
            stack.push_back({r, task.depth + 1, std::move(right)});
            stack.push_back({l, task.depth + 1, std::move(left)});
        }
        const auto n_nodes = static_cast<Eigen::Index>(tree_.feature.size());
        tree_.leaf_value = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            values_.data(), n_nodes, n_classes_);
        return std::move(tree_);
    }

private:
    int new_node() {
        tree_.feature.push_back(-1);
        tree_.threshold.push_back(0.0);
        tree_.left.push_back(-1);
        tree_.right.push_back(-1);
        values_.resize(values_.size() + static_cast<std::size_t>(n_classes_), 0.0);
        return static_cast<int>(tree_.feature.size() - 1);
    }

    Candidate best_split(const std::vector<std::size_t>& samples, const std::vector<double>& counts,
                         std::size_t min_leaf) {
        const auto n_feat = static_cast<int>(X_.cols());
        std::vector<int> features(static_cast<std::size_t>(n_feat));
        std::iota(features.begin(), features.end(), 0);
        // partial Fisher-Yates: first n_try_ entries are the sampled subset
        for (int i = 0; i < n_try_; ++i) {
            const auto j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(n_feat - i)));
            std::swap(features[static_cast<std::size_t>(i)], features[static_cast<std::size_t>(j)]);
        }

        Candidate best;
        const double total = static_cast<double>(samples.size());
        std::vector<std::pair<double, int>> column(samples.size());
        std::vector<double> left_counts(counts.size());
        std::vector<double> right_counts(counts.size());
        for (int fi = 0; fi < n_try_; ++fi) {
            const int f = features[static_cast<std::size_t>(fi)];
            for (std::size_t s = 0; s < samples.size(); ++s)
                column[s] = {X_(static_cast<Eigen::Index>(samples[s]), f), y_[samples[s]]};
            std::sort(column.begin(), column.end());
            if (column.front().first == column.back().first) continue;
            std::fill(left_counts.begin(), left_counts.end(), 0.0);
            right_counts = counts;
            for (std::size_t s = 0; s + 1 < column.size(); ++s) {
                left_counts[static_cast<std::size_t>(column[s].second)] += 1.0;
                right_counts[static_cast<std::size_t>(column[s].second)] -= 1.0;
                if (column[s].first == column[s + 1].first) continue;
                const std::size_t nl = s + 1;
                if (nl < min_leaf || samples.size() - nl < min_leaf) continue;
                const double imp = gini_sum(left_counts, static_cast<double>(nl)) +
                                   gini_sum(right_counts, total - static_cast<double>(nl));
                if (imp < best.impurity - 1e-12) {
                    best.impurity = imp;
                    best.feature = f;
                    best.threshold = 0.5 * (column[s].first + column[s + 1].first);
                    best.n_left = nl;
                }
            }
        }
        return best;
    }

    Eigen::Ref<const Eigen::MatrixXd> X_;
    std::span<const int> y_;
    int n_classes_;
    const ForestParams& params_;
    Rng& rng_;
    int n_try_ = 1;
    DecisionTree tree_;
    std::vector<double> values_;
};

} // namespace

ForestModel fit_forest(const ForestParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                       int n_classes, std::uint64_t seed) {
    ForestModel model;
    model.params = params;
    const auto n = static_cast<std::uint64_t>(X.rows());
    for (int t = 0; t < params.n_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<std::size_t> boot(static_cast<std::size_t>(n));
        for (auto& b : boot) b = static_cast<std::size_t>(rng.below(n));
        std::sort(boot.begin(), boot.end());
        TreeBuilder builder(X, y, n_classes, params, rng);
        model.trees.push_back(builder.build(std::move(boot)));
    }
    return model;
}

Eigen::VectorXd forest_scores(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int n_classes) {
    Eigen::VectorXd votes = Eigen::VectorXd::Zero(n_classes);
    for (const auto& tree : model.trees) {
        std::size_t node = 0;
        while (tree.feature[node] >= 0) {
            node = static_cast<std::size_t>(x[tree.feature[node]] <= tree.threshold[node] ? tree.left[node] : tree.right[node]);
        }
        votes += tree.leaf_value.row(static_cast<Eigen::Index>(node)).transpose();
    }
    if (!model.trees.empty()) votes /= static_cast<double>(model.trees.size());
    return votes;
}

} // namespace hed::detail

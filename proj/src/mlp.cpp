#include <cmath>
#include <numeric>

#include "hed/classifiers.hpp"

namespace hed::detail {

namespace {

constexpr Eigen::Index kBatchSize = 32;

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

} // namespace

MlpModel fit_mlp(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                 int n_classes, std::uint64_t seed) {
    Rng rng(seed);
    MlpModel model;
    model.params = params;

    std::vector<int> widths{static_cast<int>(X.cols())};
    widths.insert(widths.end(), params.hidden_layers.begin(), params.hidden_layers.end());
    widths.push_back(n_classes);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l], out = widths[l + 1];
        const double scale = std::sqrt(2.0 / in);
        Eigen::MatrixXd w(out, in);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.normal(0.0, scale);
        model.weights.push_back(std::move(w));
        model.biases.push_back(Eigen::VectorXd::Zero(out));
    }

    const Eigen::Index n = X.rows();
    const std::size_t n_layers = model.weights.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<Eigen::MatrixXd> acts(n_layers + 1);

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        rng.shuffle(order);
        for (Eigen::Index start = 0; start < n; start += kBatchSize) {
            const Eigen::Index b = std::min(kBatchSize, n - start);
            acts[0].resize(b, X.cols());
            Eigen::MatrixXd target = Eigen::MatrixXd::Zero(b, n_classes);
            for (Eigen::Index r = 0; r < b; ++r) {
                const auto idx = order[static_cast<std::size_t>(start + r)];
                acts[0].row(r) = X.row(idx);
                target(r, y[static_cast<std::size_t>(idx)]) = 1.0;
            }
            for (std::size_t l = 0; l < n_layers; ++l) {
                Eigen::MatrixXd z = acts[l] * model.weights[l].transpose();
                z.rowwise() += model.biases[l].transpose();
                acts[l + 1] = l + 1 < n_layers ? relu(z) : z;
            }
            // softmax cross-entropy gradient w.r.t. logits
            Eigen::MatrixXd delta = acts[n_layers];
            for (Eigen::Index r = 0; r < b; ++r) {
                const double m = delta.row(r).maxCoeff();
                delta.row(r) = (delta.row(r).array() - m).exp();
                delta.row(r) /= delta.row(r).sum();
            }
            delta = (delta - target) / static_cast<double>(b);

            for (std::size_t l = n_layers; l-- > 0;) {
                const Eigen::MatrixXd grad_w = delta.transpose() * acts[l] + params.l2_penalty * model.weights[l];
                const Eigen::VectorXd grad_b = delta.colwise().sum().transpose();
                if (l > 0) {
                    delta = (delta * model.weights[l]).cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
                }
                model.weights[l] -= params.learning_rate * grad_w;
                model.biases[l] -= params.learning_rate * grad_b;
            }
        }
    }
    return model;
}

Eigen::VectorXd mlp_scores(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    Eigen::VectorXd a = x;
    for (std::size_t l = 0; l < model.weights.size(); ++l) {
        Eigen::VectorXd z = model.weights[l] * a + model.biases[l];
        a = l + 1 < model.weights.size() ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
    }
    return a;
}

} // namespace hed::detail

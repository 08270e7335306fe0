#pragma once

/// \file classifiers.hpp
/// \brief SVM, random forest and MLP classifiers with per-class decision scores,
/// and grid search under video-grouped cross-validation.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "hed/data_model.hpp"
#include "hed/features.hpp"
#include "hed/tracking.hpp"

namespace hed {

enum class Family { Svm, RandomForest, Mlp };
enum class Kernel { Linear, Polynomial, Rbf };

std::string_view family_name(Family f) noexcept;
Family family_from_string(std::string_view s);
std::string_view kernel_name(Kernel k) noexcept;

/// Tunable: C, kernel, degree, gamma. Fixed: coef0 = 0, tolerance 1e-3.
/// K(a,b) = (gamma * a.b)^degree for the polynomial kernel, exp(-gamma |a-b|^2) for rbf.
struct SvmParams {
    double C = 1.0;
    Kernel kernel = Kernel::Rbf;
    int degree = 3;
    /// nullopt means 1 / n_features.
    std::optional<double> gamma;
    bool operator==(const SvmParams&) const = default;
};

/// Tunable: n_trees, max_depth, min_samples_leaf, max_features_fraction. Fixed: Gini, bootstrap.
struct ForestParams {
    int n_trees = 50;
    int max_depth = 12;
    int min_samples_leaf = 1;
    double max_features_fraction = 0.3;
    bool operator==(const ForestParams&) const = default;
};

/// Tunable: hidden_layers, learning_rate, epochs, l2_penalty. Fixed: ReLU, softmax
/// cross-entropy, mini-batch 32, plain SGD.
struct MlpParams {
    std::vector<int> hidden_layers{32};
    double learning_rate = 0.01;
    int epochs = 40;
    double l2_penalty = 1e-4;
    bool operator==(const MlpParams&) const = default;
};

using HyperparameterSpec = std::variant<SvmParams, ForestParams, MlpParams>;

Family family_of(const HyperparameterSpec& spec) noexcept;
std::string describe(const HyperparameterSpec& spec);
nlohmann::json spec_to_json(const HyperparameterSpec& spec);
HyperparameterSpec spec_from_json(const nlohmann::json& j);
void validate(const HyperparameterSpec& spec);

/// Grid file: either {"specs": [spec, ...]} or an axis product such as
/// {"family": "svm", "C": [0.5, 1], "kernel": ["poly"], "degree": [2], "gamma": ["1/n_features"]}.
std::vector<HyperparameterSpec> grid_from_json(const nlohmann::json& j);
std::vector<HyperparameterSpec> default_grid(Family family);

struct SvmMachine {
    Eigen::MatrixXd support_vectors; ///< rows
    Eigen::VectorXd dual_coef;       ///< alpha_i * y_i
    double bias = 0.0;
};

struct SvmModel {
    SvmParams params;
    double gamma = 0.0;
    /// One machine for two classes (class 1 positive), else one-vs-rest per class.
    std::vector<SvmMachine> machines;
};

struct DecisionTree {
    std::vector<int> feature; ///< -1 marks a leaf
    std::vector<double> threshold;
    std::vector<int> left;
    std::vector<int> right;
    Eigen::MatrixXd leaf_value; ///< nodes x classes, class fractions at leaves
};

struct ForestModel {
    ForestParams params;
    std::vector<DecisionTree> trees;
};

struct MlpModel {
    MlpParams params;
    std::vector<Eigen::MatrixXd> weights; ///< out x in
    std::vector<Eigen::VectorXd> biases;
};

class TrainedModel {
public:
    using Fitted = std::variant<SvmModel, ForestModel, MlpModel>;

    TrainedModel(HyperparameterSpec spec, Fitted fitted, int n_classes, int n_features, std::uint64_t seed);

    Family family() const noexcept { return family_of(spec_); }
    const HyperparameterSpec& spec() const noexcept { return spec_; }
    const Fitted& fitted() const noexcept { return fitted_; }
    int n_classes() const noexcept { return n_classes_; }
    int n_features() const noexcept { return n_features_; }
    std::uint64_t train_seed() const noexcept { return train_seed_; }

    /// SVM: signed margins; RF: soft vote fractions; MLP: output activations.
    Eigen::VectorXd decision_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    /// Row-wise scores for a sample matrix.
    Eigen::MatrixXd decision_scores_rows(const Eigen::Ref<const Eigen::MatrixXd>& samples) const;

    nlohmann::json to_json() const;
    static TrainedModel from_json(const nlohmann::json& j, int expected_n_features = kFeatureDim);

private:
    HyperparameterSpec spec_;
    Fitted fitted_;
    int n_classes_;
    int n_features_;
    std::uint64_t train_seed_;
};

/// n_classes = 0 infers max(label) + 1 (at least 2).
TrainedModel train(const HyperparameterSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& samples,
                   std::span<const ClassLabel> labels, std::uint64_t seed, int n_classes = 0);

/// Index of the largest score; ties resolve to the lowest class id.
int argmax_class(const Eigen::Ref<const Eigen::VectorXd>& scores) noexcept;

struct GridSearchResult {
    std::size_t best_index = 0;
    HyperparameterSpec best;
    std::vector<double> mean_recall;
    std::vector<std::vector<double>> fold_recall; ///< NaN where a fold has no Emergency frames
};

/// Scores each spec by Emergency recall of argmax predictions averaged over the
/// k video-level folds; ties keep the earliest spec.
GridSearchResult grid_search_cv(const std::vector<HyperparameterSpec>& grid, const Dataset& train_set, int k,
                                std::uint64_t seed, int n_classes, const TrackerConfig& tracker = {});

namespace detail {

Eigen::VectorXd svm_kernel_row(const SvmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                               const Eigen::Ref<const Eigen::VectorXd>& x);
SvmModel fit_svm(const SvmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                 int n_classes);
Eigen::VectorXd svm_scores(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

ForestModel fit_forest(const ForestParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                       int n_classes, std::uint64_t seed);
Eigen::VectorXd forest_scores(const ForestModel& model, const Eigen::Ref<const Eigen::VectorXd>& x, int n_classes);

MlpModel fit_mlp(const MlpParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                 int n_classes, std::uint64_t seed);
Eigen::VectorXd mlp_scores(const MlpModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

} // namespace detail

} // namespace hed

#pragma once

/// \file calibration.hpp
/// \brief Softmax normalization and decision-threshold moving for the Emergency class.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "hed/data_model.hpp"

namespace hed {

/// Numerically stable softmax of a score vector. Throws NonFinite on NaN/Inf input.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& scores) {
    using Scalar = typename Derived::Scalar;
    if (!scores.allFinite()) throw Error(Errc::NonFinite, "softmax of non-finite scores");
    const Scalar m = scores.maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (scores.array() - m).exp().matrix();
    return e / e.sum();
}

/// Row-wise softmax of a score matrix.
Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& scores);

enum class CalibrationMode { Binary, Multiclass };

struct CurvePoint {
    double threshold;
    double objective;
};

struct RocPoint {
    double threshold;
    double fpr;
    double tpr;
};

/// Emergency probability grid scanned by emergency_threshold: 0, 0.001, ..., 0.499.
constexpr int kThresholdGridSize = 500;
constexpr double kThresholdGridStep = 0.001;
inline double threshold_grid_value(int i) noexcept { return i * kThresholdGridStep; }

struct Calibration {
    CalibrationMode mode = CalibrationMode::Multiclass;
    /// Unset means plain argmax.
    std::optional<double> threshold;
    /// Grid index of the threshold for multiclass calibrations.
    std::optional<int> grid_index;
    std::vector<CurvePoint> curve;
    std::vector<RocPoint> roc;
};

/// Maximizes Youden's J = sensitivity + specificity - 1 over thresholds {0, 1} and
/// midpoints between adjacent distinct probabilities. A sample is positive when
/// prob >= threshold. Ties resolve to the smallest threshold.
Calibration youden_threshold(std::span<const double> probs, std::span<const int> labels);

/// Scans the 0.001-step grid below 0.5. At threshold t a sample is Emergency when
/// its softmax Emergency probability is >= t, else its argmax class. Picks the
/// first t with maximal Emergency F1.
Calibration emergency_threshold(const Eigen::Ref<const Eigen::MatrixXd>& scores, std::span<const ClassLabel> labels);

/// Binary: Emergency iff p(Emergency) >= t, else Normal. Multiclass: Emergency if
/// p(Emergency) >= t, else the argmax class. Without a threshold: argmax.
ClassLabel classify_with_threshold(const Eigen::Ref<const Eigen::VectorXd>& probs, const Calibration& calibration);

nlohmann::json calibration_to_json(const Calibration& c);
Calibration calibration_from_json(const nlohmann::json& j);

/// CSV with header "threshold,objective".
void write_threshold_curve_csv(const Calibration& c, const std::filesystem::path& file);
/// CSV with header "threshold,fpr,tpr".
void write_roc_csv(const Calibration& c, const std::filesystem::path& file);

} // namespace hed

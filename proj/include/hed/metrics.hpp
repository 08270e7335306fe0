#pragma once

/// \file metrics.hpp
/// \brief Confusion matrices and recall/precision/F1 with micro-averaging over a label subset.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hed/data_model.hpp"

namespace hed {

/// A metric value with an explicit flag for 0/0. Undefined values are reported as 0.
struct Ratio {
    double value = 0.0;
    bool defined = false;

    static Ratio of(std::int64_t num, std::int64_t den) noexcept {
        return den > 0 ? Ratio{static_cast<double>(num) / static_cast<double>(den), true} : Ratio{};
    }
};

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows are truth, columns are predictions.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes) : counts_(CountMatrix::Zero(n_classes, n_classes)) {}
    explicit ConfusionMatrix(CountMatrix counts);

    int n_classes() const noexcept { return static_cast<int>(counts_.rows()); }
    const CountMatrix& counts() const noexcept { return counts_; }
    std::int64_t operator()(int truth, int pred) const { return counts_(truth, pred); }
    void add(int truth, int pred) { ++counts_(truth, pred); }

    std::int64_t total() const noexcept { return counts_.sum(); }
    std::int64_t tp(int c) const { return counts_(c, c); }
    std::int64_t fn(int c) const { return counts_.row(c).sum() - counts_(c, c); }
    std::int64_t fp(int c) const { return counts_.col(c).sum() - counts_(c, c); }
    double accuracy() const noexcept;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix& other) const { return counts_ == other.counts_; }

private:
    CountMatrix counts_;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths, int n_classes);
ConfusionMatrix confusion(std::span<const ClassLabel> preds, std::span<const ClassLabel> truths, int n_classes);

/// TP / (TP + FN) of class 1 in a 2-class matrix.
double recall_binary(const ConfusionMatrix& cm);

struct MicroMetrics {
    Ratio recall;
    Ratio precision;
    Ratio f1;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

/// TP, FN and FP pooled over the one-vs-rest views of the given classes.
MicroMetrics micro_metrics(const ConfusionMatrix& cm, std::span<const int> label_subset);

/// F1 from pooled counts, 2TP / (2TP + FP + FN), which equals the harmonic mean
/// of precision and recall. Undefined when all three counts are zero.
inline Ratio f1_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn) noexcept {
    return Ratio::of(2 * tp, 2 * tp + fp + fn);
}

} // namespace hed

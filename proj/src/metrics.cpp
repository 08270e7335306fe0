#include "hed/metrics.hpp"

#include <string>

namespace hed {

ConfusionMatrix::ConfusionMatrix(CountMatrix counts) : counts_(std::move(counts)) {
    if (counts_.rows() != counts_.cols()) throw Error(Errc::DimensionMismatch, "confusion matrix must be square");
    if ((counts_.array() < 0).any()) throw Error(Errc::InvalidArgument, "negative confusion count");
}

double ConfusionMatrix::accuracy() const noexcept {
    const auto n = total();
    return n > 0 ? static_cast<double>(counts_.trace()) / static_cast<double>(n) : 0.0;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.n_classes() != n_classes()) throw Error(Errc::DimensionMismatch, "class count mismatch");
    counts_ += other.counts_;
    return *this;
}

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths, int n_classes) {
    if (preds.size() != truths.size()) {
        throw Error(Errc::LengthMismatch, std::to_string(preds.size()) + " predictions vs " +
                                              std::to_string(truths.size()) + " truths");
    }
    ConfusionMatrix cm(n_classes);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || preds[i] >= n_classes || truths[i] < 0 || truths[i] >= n_classes) {
            throw Error(Errc::LabelOutOfRange, "label outside [0, " + std::to_string(n_classes) + ")");
        }
        cm.add(truths[i], preds[i]);
    }
    return cm;
}

ConfusionMatrix confusion(std::span<const ClassLabel> preds, std::span<const ClassLabel> truths, int n_classes) {
    std::vector<int> p(preds.size()), t(truths.size());
    for (std::size_t i = 0; i < preds.size(); ++i) p[i] = to_int(preds[i]);
    for (std::size_t i = 0; i < truths.size(); ++i) t[i] = to_int(truths[i]);
    return confusion(p, t, n_classes);
}

double recall_binary(const ConfusionMatrix& cm) {
    if (cm.n_classes() != 2) throw Error(Errc::DimensionMismatch, "recall_binary needs a 2-class matrix");
    const auto tp = cm(1, 1), fn = cm(1, 0);
    if (tp + fn == 0) throw Error(Errc::NoPositives, "no positive samples");
    return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

MicroMetrics micro_metrics(const ConfusionMatrix& cm, std::span<const int> label_subset) {
    if (label_subset.empty()) throw Error(Errc::EmptySubset, "label subset is empty");
    MicroMetrics m;
    for (int c : label_subset) {
        if (c < 0 || c >= cm.n_classes()) throw Error(Errc::LabelOutOfRange, "subset label out of range");
        m.tp += cm.tp(c);
        m.fn += cm.fn(c);
        m.fp += cm.fp(c);
    }
    m.recall = Ratio::of(m.tp, m.tp + m.fn);
    m.precision = Ratio::of(m.tp, m.tp + m.fp);
    m.f1 = f1_from_counts(m.tp, m.fp, m.fn);
    m.f1.defined = m.recall.defined && m.precision.defined;
    return m;
}

} // namespace hed

#include "hed/calibration.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "hed/classifiers.hpp"
#include "hed/metrics.hpp"

namespace hed {

using nlohmann::json;

Eigen::MatrixXd softmax_rows(const Eigen::Ref<const Eigen::MatrixXd>& scores) {
    Eigen::MatrixXd out(scores.rows(), scores.cols());
    for (Eigen::Index r = 0; r < scores.rows(); ++r) out.row(r) = softmax(scores.row(r).transpose()).transpose();
    return out;
}

Calibration youden_threshold(std::span<const double> probs, std::span<const int> labels) {
    if (probs.size() != labels.size()) throw Error(Errc::LengthMismatch, "probabilities and labels differ in length");
    std::int64_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!std::isfinite(probs[i])) throw Error(Errc::NonFinite, "non-finite probability");
        if (labels[i] != 0 && labels[i] != 1) throw Error(Errc::LabelOutOfRange, "binary labels must be 0 or 1");
        (labels[i] == 1 ? n_pos : n_neg) += 1;
    }
    if (n_pos == 0 || n_neg == 0) throw Error(Errc::SingleClass, "both classes are required");

    std::vector<std::pair<double, int>> sorted(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) sorted[i] = {probs[i], labels[i]};
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> candidates{0.0, 1.0};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i].first != sorted[i + 1].first) candidates.push_back(0.5 * (sorted[i].first + sorted[i + 1].first));
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // Sweep ascending thresholds; samples below the threshold are predicted negative.
    Calibration cal;
    cal.mode = CalibrationMode::Binary;
    std::size_t below = 0;
    std::int64_t pos_below = 0, neg_below = 0;
    std::int64_t best_num = 0;
    bool have_best = false;
    for (double t : candidates) {
        while (below < sorted.size() && sorted[below].first < t) {
            (sorted[below].second == 1 ? pos_below : neg_below) += 1;
            ++below;
        }
        const std::int64_t tp = n_pos - pos_below;
        const std::int64_t tn = neg_below;
        // J * n_pos * n_neg, exact in integers
        const std::int64_t num = tp * n_neg + tn * n_pos - n_pos * n_neg;
        cal.curve.push_back({t, static_cast<double>(num) / static_cast<double>(n_pos * n_neg)});
        cal.roc.push_back({t, static_cast<double>(n_neg - tn) / static_cast<double>(n_neg),
                           static_cast<double>(tp) / static_cast<double>(n_pos)});
        if (!have_best || num > best_num) {
            best_num = num;
            cal.threshold = t;
            have_best = true;
        }
    }
    return cal;
}

Calibration emergency_threshold(const Eigen::Ref<const Eigen::MatrixXd>& scores, std::span<const ClassLabel> labels) {
    if (static_cast<std::size_t>(scores.rows()) != labels.size()) {
        throw Error(Errc::LengthMismatch, "scores and labels differ in length");
    }
    if (scores.cols() < 2) throw Error(Errc::DimensionMismatch, "need at least 2 class scores");
    constexpr int emergency = to_int(ClassLabel::Emergency);

    // Samples already argmax-Emergency are always predicted Emergency; the others
    // switch once the threshold drops to their Emergency probability.
    std::int64_t n_pos = 0, fixed_tp = 0, fixed_fp = 0;
    std::vector<double> movable_pos, movable_neg;
    for (Eigen::Index r = 0; r < scores.rows(); ++r) {
        const Eigen::VectorXd p = softmax(scores.row(r).transpose());
        const bool truth_e = labels[static_cast<std::size_t>(r)] == ClassLabel::Emergency;
        n_pos += truth_e;
        if (argmax_class(p) == emergency) {
            (truth_e ? fixed_tp : fixed_fp) += 1;
        } else {
            (truth_e ? movable_pos : movable_neg).push_back(p[emergency]);
        }
    }
    if (n_pos == 0) throw Error(Errc::NoEmergencySamples, "no Emergency samples to calibrate on");
    std::sort(movable_pos.begin(), movable_pos.end());
    std::sort(movable_neg.begin(), movable_neg.end());

    auto at_least = [](const std::vector<double>& v, double t) {
        return static_cast<std::int64_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
    };

    Calibration cal;
    cal.mode = CalibrationMode::Multiclass;
    std::int64_t best_num = -1, best_den = 1;
    for (int i = 0; i < kThresholdGridSize; ++i) {
        const double t = threshold_grid_value(i);
        const std::int64_t tp = fixed_tp + at_least(movable_pos, t);
        const std::int64_t fp = fixed_fp + at_least(movable_neg, t);
        const std::int64_t fn = n_pos - tp;
        const std::int64_t num = 2 * tp, den = 2 * tp + fp + fn;
        cal.curve.push_back({t, static_cast<double>(num) / static_cast<double>(den)});
        if (num * best_den > best_num * den) {
            best_num = num;
            best_den = den;
            cal.threshold = t;
            cal.grid_index = i;
        }
    }
    return cal;
}

ClassLabel classify_with_threshold(const Eigen::Ref<const Eigen::VectorXd>& probs, const Calibration& calibration) {
    constexpr int emergency = to_int(ClassLabel::Emergency);
    if (calibration.threshold && probs.size() > emergency) {
        if (probs[emergency] >= *calibration.threshold) return ClassLabel::Emergency;
        if (calibration.mode == CalibrationMode::Binary) return ClassLabel::Normal;
    }
    return static_cast<ClassLabel>(argmax_class(probs));
}

json calibration_to_json(const Calibration& c) {
    json curve = json::array();
    for (const auto& p : c.curve) curve.push_back({p.threshold, p.objective});
    json roc = json::array();
    for (const auto& p : c.roc) roc.push_back({p.threshold, p.fpr, p.tpr});
    return json{{"format", "hed-calibration"},
                {"version", 1},
                {"mode", c.mode == CalibrationMode::Binary ? "binary" : "multiclass"},
                {"threshold", c.threshold ? json(*c.threshold) : json(nullptr)},
                {"grid_index", c.grid_index ? json(*c.grid_index) : json(nullptr)},
                {"curve", std::move(curve)},
                {"roc", std::move(roc)}};
}

Calibration calibration_from_json(const json& j) {
    try {
        if (j.at("format") != "hed-calibration" || j.at("version") != 1) {
            throw Error(Errc::MalformedRecord, "not a version-1 calibration file");
        }
        Calibration c;
        const auto mode = j.at("mode").get<std::string>();
        if (mode == "binary") c.mode = CalibrationMode::Binary;
        else if (mode == "multiclass") c.mode = CalibrationMode::Multiclass;
        else throw Error(Errc::MalformedRecord, "unknown calibration mode");
        if (!j.at("threshold").is_null()) c.threshold = j["threshold"].get<double>();
        if (j.contains("grid_index") && !j["grid_index"].is_null()) c.grid_index = j["grid_index"].get<int>();
        if (c.threshold && (*c.threshold < 0.0 || *c.threshold > 1.0)) {
            throw Error(Errc::MalformedRecord, "threshold outside [0,1]");
        }
        for (const auto& p : j.value("curve", json::array())) c.curve.push_back({p[0].get<double>(), p[1].get<double>()});
        for (const auto& p : j.value("roc", json::array()))
            c.roc.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
        return c;
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("calibration file: ") + e.what());
    }
}

void write_threshold_curve_csv(const Calibration& c, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    out << "threshold,objective\n";
    char buf[64];
    for (const auto& p : c.curve) {
        std::snprintf(buf, sizeof buf, "%.6f,%.17g\n", p.threshold, p.objective);
        out << buf;
    }
}

void write_roc_csv(const Calibration& c, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    out << "threshold,fpr,tpr\n";
    char buf[96];
    for (const auto& p : c.roc) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.threshold, p.fpr, p.tpr);
        out << buf;
    }
}

} // namespace hed

#pragma once

/// \file evaluation.hpp
/// \brief Full detection chain over test videos and the resulting evaluation report.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hed/calibration.hpp"
#include "hed/classifiers.hpp"
#include "hed/features.hpp"
#include "hed/metrics.hpp"
#include "hed/stream.hpp"

namespace hed {

/// Scores, softmax and thresholded label for every sample row.
std::vector<ClassLabel> predict_labels(const TrainedModel& model, const Calibration& calibration,
                                       const Eigen::Ref<const Eigen::MatrixXd>& samples);

/// Raw (undelayed) predictions of one video.
LabeledStream predict_stream(const TrainedModel& model, const Calibration& calibration, const VideoSamples& video);

struct EvaluationReport {
    std::string model_name;
    Mode mode = Mode::Walking;
    /// Emergency recall and F1 before the delay filter.
    Ratio recall;
    Ratio f1;
    /// Micro recall over all classes, equal to accuracy.
    Ratio micro_recall_all;
    std::optional<double> threshold;
    int delay_ms = 0;
    /// Emergency FP and FN after the delay divided by the counts before it.
    Ratio fp_ratio;
    Ratio fn_ratio;
    ConfusionMatrix confusion{2};
    ConfusionMatrix confusion_delayed{2};
    /// Stability latency of the raw predictions.
    LatencyStats latency;
    std::size_t n_videos = 0;
    std::size_t n_frames = 0;
};

struct EvaluationTrace {
    std::vector<LabeledStream> raw;
    std::vector<std::vector<ClassLabel>> committed;
    std::vector<EmergencyEvent> events;
};

/// Runs features, scores, softmax, threshold and delay per video and pools the counts.
/// The trace, when given, receives the per-frame predictions and events.
EvaluationReport evaluate(const TrainedModel& model, const Calibration& calibration, int delay_ms,
                          const std::vector<VideoSamples>& test, Mode mode, EvaluationTrace* trace = nullptr);

/// "SVM", "RF" or "MLP", with a "_thresh" suffix for a moved threshold.
std::string model_display_name(Family family, bool thresholded);

nlohmann::json report_to_json(const EvaluationReport& report);
/// Fixed-width table: model, mode, recall, F1, t, d (ms), FP ratio, FN ratio.
std::string report_table(const std::vector<EvaluationReport>& reports);

} // namespace hed

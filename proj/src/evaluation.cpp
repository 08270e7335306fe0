#include "hed/evaluation.hpp"

#include <cstdio>
#include <sstream>

namespace hed {

using nlohmann::json;

std::vector<ClassLabel> predict_labels(const TrainedModel& model, const Calibration& calibration,
                                       const Eigen::Ref<const Eigen::MatrixXd>& samples) {
    const Eigen::MatrixXd probs = softmax_rows(model.decision_scores_rows(samples));
    std::vector<ClassLabel> out;
    out.reserve(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) out.push_back(classify_with_threshold(probs.row(r).transpose(), calibration));
    return out;
}

LabeledStream predict_stream(const TrainedModel& model, const Calibration& calibration, const VideoSamples& video) {
    LabeledStream s;
    s.video_id = video.video_id;
    s.truth = video.labels;
    s.timestamps_ms = video.timestamps_ms;
    if (video.size() > 0) s.predicted = predict_labels(model, calibration, video.features);
    return s;
}

std::string model_display_name(Family family, bool thresholded) {
    std::string name;
    switch (family) {
    case Family::Svm: name = "SVM"; break;
    case Family::RandomForest: name = "RF"; break;
    case Family::Mlp: name = "MLP"; break;
    }
    return thresholded ? name + "_thresh" : name;
}

EvaluationReport evaluate(const TrainedModel& model, const Calibration& calibration, int delay_ms,
                          const std::vector<VideoSamples>& test, Mode mode, EvaluationTrace* trace) {
    const int n_classes = model.n_classes();
    EvaluationReport r;
    r.model_name = model_display_name(model.family(), calibration.threshold.has_value());
    r.mode = mode;
    r.threshold = calibration.threshold;
    r.delay_ms = delay_ms;
    r.confusion = ConfusionMatrix(n_classes);
    r.confusion_delayed = ConfusionMatrix(n_classes);
    r.n_videos = test.size();

    for (const auto& video : test) {
        LabeledStream s = predict_stream(model, calibration, video);
        const auto committed = apply_delay(s.predicted, delay_ms, video.frame_period_ms);
        r.confusion += confusion(s.predicted, s.truth, n_classes);
        r.confusion_delayed += confusion(committed, s.truth, n_classes);
        r.latency += stability_latency(s.predicted, s.truth, s.timestamps_ms);
        r.n_frames += s.truth.size();
        if (trace) {
            auto events = detect_events(s.predicted, committed, s.timestamps_ms, s.video_id);
            trace->events.insert(trace->events.end(), events.begin(), events.end());
            trace->committed.push_back(committed);
            trace->raw.push_back(std::move(s));
        }
    }
    r.latency.summarize();

    constexpr int emergency[] = {to_int(ClassLabel::Emergency)};
    const auto pre = micro_metrics(r.confusion, emergency);
    const auto post = micro_metrics(r.confusion_delayed, emergency);
    r.recall = pre.recall;
    r.f1 = pre.f1;
    std::vector<int> all(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) all[static_cast<std::size_t>(c)] = c;
    r.micro_recall_all = micro_metrics(r.confusion, all).recall;
    r.fp_ratio = Ratio::of(post.fp, pre.fp);
    r.fn_ratio = Ratio::of(post.fn, pre.fn);
    return r;
}

namespace {

json ratio_json(const Ratio& r) { return json{{"value", r.value}, {"defined", r.defined}}; }

json matrix_json(const ConfusionMatrix& cm) {
    json rows = json::array();
    for (int t = 0; t < cm.n_classes(); ++t) {
        json row = json::array();
        for (int p = 0; p < cm.n_classes(); ++p) row.push_back(cm(t, p));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string fixed(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string ratio_cell(const Ratio& r) { return r.defined ? fixed(r.value, 3) : "0/0"; }

} // namespace

json report_to_json(const EvaluationReport& r) {
    return json{{"model", r.model_name},
                {"mode", mode_name(r.mode)},
                {"recall", ratio_json(r.recall)},
                {"f1", ratio_json(r.f1)},
                {"micro_recall_all", ratio_json(r.micro_recall_all)},
                {"threshold", r.threshold ? json(*r.threshold) : json(nullptr)},
                {"delay_ms", r.delay_ms},
                {"fp_ratio", ratio_json(r.fp_ratio)},
                {"fn_ratio", ratio_json(r.fn_ratio)},
                {"confusion", matrix_json(r.confusion)},
                {"confusion_delayed", matrix_json(r.confusion_delayed)},
                {"latency",
                 {{"n_events", r.latency.n_events},
                  {"detected", r.latency.detected_count},
                  {"mean_ms", r.latency.mean_ms},
                  {"std_ms", r.latency.std_ms},
                  {"max_ms", r.latency.max_ms}}},
                {"n_videos", r.n_videos},
                {"n_frames", r.n_frames}};
}

std::string report_table(const std::vector<EvaluationReport>& reports) {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-12s %-10s %7s %7s %7s %7s %9s %9s\n", "model", "mode", "recall", "F1", "t", "d_ms",
                  "FP_ratio", "FN_ratio");
    out << line;
    for (const auto& r : reports) {
        std::snprintf(line, sizeof line, "%-12s %-10s %7s %7s %7s %7d %9s %9s\n", r.model_name.c_str(),
                      std::string(mode_name(r.mode)).c_str(), fixed(r.recall.value, 3).c_str(), fixed(r.f1.value, 3).c_str(),
                      r.threshold ? fixed(*r.threshold, 3).c_str() : "-", r.delay_ms, ratio_cell(r.fp_ratio).c_str(),
                      ratio_cell(r.fn_ratio).c_str());
        out << line;
    }
    return out.str();
}

} // namespace hed

#include "hed/stream.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "hed/metrics.hpp"

namespace hed {

DelayFilter::DelayFilter(int delay_ms, int frame_period_ms)
    : delay_ms_(delay_ms), frame_period_ms_(frame_period_ms),
      persistence_(required_persistence(delay_ms, frame_period_ms)) {}

int DelayFilter::required_persistence(int delay_ms, int frame_period_ms) {
    if (delay_ms < 0) throw Error(Errc::InvalidArgument, "delay must be >= 0");
    if (frame_period_ms <= 0) throw Error(Errc::InvalidArgument, "frame period must be > 0");
    if (delay_ms == 0) return 1;
    return 1 + (delay_ms + frame_period_ms - 1) / frame_period_ms;
}

ClassLabel DelayFilter::step(ClassLabel raw) noexcept {
    if (raw == committed_) {
        pending_count_ = 0;
        return committed_;
    }
    if (pending_count_ > 0 && raw == pending_label_) {
        ++pending_count_;
    } else {
        pending_label_ = raw;
        pending_count_ = 1;
    }
    if (pending_count_ >= persistence_) {
        committed_ = raw;
        pending_count_ = 0;
    }
    return committed_;
}

void DelayFilter::reset() noexcept {
    committed_ = ClassLabel::Normal;
    pending_count_ = 0;
}

std::optional<std::pair<ClassLabel, int>> DelayFilter::pending() const noexcept {
    if (pending_count_ == 0) return std::nullopt;
    return std::pair{pending_label_, pending_count_};
}

std::vector<ClassLabel> apply_delay(std::span<const ClassLabel> raw, int delay_ms, int frame_period_ms) {
    DelayFilter filter(delay_ms, frame_period_ms);
    std::vector<ClassLabel> out;
    out.reserve(raw.size());
    for (auto r : raw) out.push_back(filter.step(r));
    return out;
}

DelayOptimization optimize_delay(std::span<const LabeledStream> streams, int frame_period_ms) {
    std::int64_t positives = 0;
    for (const auto& s : streams) {
        if (s.predicted.size() != s.truth.size()) throw Error(Errc::LengthMismatch, "stream " + s.video_id);
        for (auto t : s.truth) positives += t == ClassLabel::Emergency;
    }
    if (positives == 0) throw Error(Errc::NoEmergencyTruth, "no Emergency frames in the tuning streams");

    // delays sharing a persistence produce identical outputs
    std::map<int, DelayCurvePoint> by_persistence;
    DelayOptimization opt;
    for (int i = 0; i < kDelayGridSize; ++i) {
        const int d = i * kDelayStepMs;
        const int n_d = DelayFilter::required_persistence(d, frame_period_ms);
        auto it = by_persistence.find(n_d);
        if (it == by_persistence.end()) {
            DelayCurvePoint p;
            for (const auto& s : streams) {
                const auto committed = apply_delay(s.predicted, d, frame_period_ms);
                for (std::size_t k = 0; k < committed.size(); ++k) {
                    const bool pe = committed[k] == ClassLabel::Emergency;
                    const bool te = s.truth[k] == ClassLabel::Emergency;
                    p.tp += pe && te;
                    p.fp += pe && !te;
                    p.fn += !pe && te;
                }
            }
            p.f1 = f1_from_counts(p.tp, p.fp, p.fn).value;
            it = by_persistence.emplace(n_d, p).first;
        }
        DelayCurvePoint p = it->second;
        p.delay_ms = d;
        opt.curve.push_back(p);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < opt.curve.size(); ++i) {
        // exact comparison of 2tp / (2tp + fp + fn)
        const auto& a = opt.curve[i];
        const auto& b = opt.curve[best];
        const std::int64_t an = 2 * a.tp, ad = 2 * a.tp + a.fp + a.fn;
        const std::int64_t bn = 2 * b.tp, bd = 2 * b.tp + b.fp + b.fn;
        if (an * bd > bn * ad) best = i;
    }
    opt.best_delay_ms = opt.curve[best].delay_ms;
    return opt;
}

void write_delay_curve_csv(const DelayOptimization& opt, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    out << "d_ms,f1,fp,fn\n";
    char buf[96];
    for (const auto& p : opt.curve) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%lld,%lld\n", p.delay_ms, p.f1, static_cast<long long>(p.fp),
                      static_cast<long long>(p.fn));
        out << buf;
    }
}

std::vector<EmergencyEvent> detect_events(std::span<const ClassLabel> raw, std::span<const ClassLabel> committed,
                                          std::span<const std::int64_t> timestamps_ms, std::string_view video_id) {
    if (raw.size() != committed.size() || raw.size() != timestamps_ms.size()) {
        throw Error(Errc::LengthMismatch, "raw, committed and timestamp streams differ in length");
    }
    std::vector<EmergencyEvent> events;
    for (std::size_t k = 0; k < committed.size(); ++k) {
        if (committed[k] != ClassLabel::Emergency || (k > 0 && committed[k - 1] == ClassLabel::Emergency)) continue;
        std::size_t first = k;
        while (first > 0 && raw[first - 1] == ClassLabel::Emergency) --first;
        events.push_back({std::string(video_id), timestamps_ms[k], timestamps_ms[first]});
    }
    return events;
}

std::string event_to_jsonl(const EmergencyEvent& e) {
    return nlohmann::json{{"video", e.video_id}, {"trigger_ms", e.trigger_timestamp_ms}, {"first_raw_ms", e.first_raw_timestamp_ms}}
        .dump();
}

EmergencyEvent event_from_jsonl(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        return {j.at("video").get<std::string>(), j.at("trigger_ms").get<std::int64_t>(),
                j.at("first_raw_ms").get<std::int64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("event record: ") + e.what());
    }
}

void LatencyStats::summarize() {
    detected_count = latency_ms.size();
    n_events = detected_count + undetected_onsets_ms.size();
    mean_ms = std_ms = 0.0;
    max_ms = 0;
    if (latency_ms.empty()) return;
    double sum = 0.0;
    for (auto l : latency_ms) {
        sum += static_cast<double>(l);
        max_ms = std::max(max_ms, l);
    }
    mean_ms = sum / static_cast<double>(latency_ms.size());
    double var = 0.0;
    for (auto l : latency_ms) var += (static_cast<double>(l) - mean_ms) * (static_cast<double>(l) - mean_ms);
    std_ms = std::sqrt(var / static_cast<double>(latency_ms.size()));
}

LatencyStats& LatencyStats::operator+=(const LatencyStats& other) {
    latency_ms.insert(latency_ms.end(), other.latency_ms.begin(), other.latency_ms.end());
    undetected_onsets_ms.insert(undetected_onsets_ms.end(), other.undetected_onsets_ms.begin(),
                                other.undetected_onsets_ms.end());
    summarize();
    return *this;
}

LatencyStats stability_latency(std::span<const ClassLabel> raw, std::span<const ClassLabel> truth,
                               std::span<const std::int64_t> timestamps_ms) {
    if (raw.size() != truth.size() || raw.size() != timestamps_ms.size()) {
        throw Error(Errc::LengthMismatch, "raw, truth and timestamp streams differ in length");
    }
    LatencyStats stats;
    std::size_t k = 0;
    while (k < truth.size()) {
        if (truth[k] != ClassLabel::Emergency) {
            ++k;
            continue;
        }
        const std::size_t onset = k;
        while (k < truth.size() && truth[k] == ClassLabel::Emergency) ++k;
        const std::size_t end = k; // exclusive
        std::size_t stable = end;
        while (stable > onset && raw[stable - 1] == ClassLabel::Emergency) --stable;
        if (stable == end) {
            stats.undetected_onsets_ms.push_back(timestamps_ms[onset]);
        } else {
            stats.latency_ms.push_back(timestamps_ms[stable] - timestamps_ms[onset]);
        }
    }
    stats.summarize();
    return stats;
}

} // namespace hed

#pragma once

/// \file stream.hpp
/// \brief Delay (persistence) filter over per-frame labels, delay optimization,
/// emergency events and stability latency.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hed/data_model.hpp"

namespace hed {

constexpr int kMaxDelayMs = 1500;
constexpr int kDelayStepMs = 10;
constexpr int kDelayGridSize = kMaxDelayMs / kDelayStepMs + 1;

/// Commits to a new label only after it was observed in n_d consecutive frames,
/// where n_d = 1 for a zero delay and 1 + ceil(delay / frame_period) otherwise.
/// Frames inside the confirmation window keep the previously committed label.
/// The committed label starts at Normal.
class DelayFilter {
public:
    DelayFilter(int delay_ms, int frame_period_ms);

    static int required_persistence(int delay_ms, int frame_period_ms);

    ClassLabel step(ClassLabel raw) noexcept;
    void reset() noexcept;

    int delay_ms() const noexcept { return delay_ms_; }
    int frame_period_ms() const noexcept { return frame_period_ms_; }
    int persistence() const noexcept { return persistence_; }
    ClassLabel committed() const noexcept { return committed_; }
    /// Candidate label and its consecutive count, if one is being confirmed.
    std::optional<std::pair<ClassLabel, int>> pending() const noexcept;

private:
    int delay_ms_;
    int frame_period_ms_;
    int persistence_;
    ClassLabel committed_ = ClassLabel::Normal;
    ClassLabel pending_label_ = ClassLabel::Normal;
    int pending_count_ = 0;
};

std::vector<ClassLabel> apply_delay(std::span<const ClassLabel> raw, int delay_ms, int frame_period_ms);

/// Raw predictions and ground truth of one video.
struct LabeledStream {
    std::string video_id;
    std::vector<ClassLabel> predicted;
    std::vector<ClassLabel> truth;
    std::vector<std::int64_t> timestamps_ms;
};

struct DelayCurvePoint {
    int delay_ms = 0;
    double f1 = 0.0;
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
};

struct DelayOptimization {
    int best_delay_ms = 0;
    std::vector<DelayCurvePoint> curve;
};

/// Filters every stream at each delay 0, 10, ..., 1500 ms and pools Emergency
/// TP/FP/FN over all frames; returns the delay with maximal F1 (ties: smallest).
DelayOptimization optimize_delay(std::span<const LabeledStream> streams, int frame_period_ms);

void write_delay_curve_csv(const DelayOptimization& opt, const std::filesystem::path& file);

struct EmergencyEvent {
    std::string video_id;
    std::int64_t trigger_timestamp_ms = 0;
    std::int64_t first_raw_timestamp_ms = 0;
    bool operator==(const EmergencyEvent&) const = default;
};

/// One event per maximal run of committed Emergency. first_raw is the start of
/// the raw Emergency run that led to the commit.
std::vector<EmergencyEvent> detect_events(std::span<const ClassLabel> raw, std::span<const ClassLabel> committed,
                                          std::span<const std::int64_t> timestamps_ms, std::string_view video_id);

std::string event_to_jsonl(const EmergencyEvent& e);
EmergencyEvent event_from_jsonl(std::string_view line);

struct LatencyStats {
    /// Latency of each detected truth-Emergency episode.
    std::vector<std::int64_t> latency_ms;
    /// Onset timestamps of episodes whose prediction never settled on Emergency.
    std::vector<std::int64_t> undetected_onsets_ms;
    std::size_t n_events = 0;
    std::size_t detected_count = 0;
    double mean_ms = 0.0;
    double std_ms = 0.0; ///< population standard deviation
    std::int64_t max_ms = 0;

    /// Recompute the summary fields from latency_ms.
    void summarize();
    LatencyStats& operator+=(const LatencyStats& other);
};

/// For each maximal truth-Emergency episode, the time from its onset to the first
/// frame from which the raw prediction stays Emergency until the episode ends.
LatencyStats stability_latency(std::span<const ClassLabel> raw, std::span<const ClassLabel> truth,
                               std::span<const std::int64_t> timestamps_ms);

} // namespace hed

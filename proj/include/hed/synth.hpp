#pragma once

/// \file synth.hpp
/// \brief Seeded synthetic BODY_25 keypoint streams with ground-truth labels.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hed/data_model.hpp"

namespace hed {

enum class ScenarioKind { Walk, FallDuringWalk, SitWheelchair, SlumpUnconscious, StandUpPause, Bystanders };

std::string_view scenario_name(ScenarioKind k) noexcept;
ScenarioKind scenario_from_string(std::string_view s);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::Walk;
    int duration_frames = 80;
    double noise_px = 0.0;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;
    int frame_period_ms = 100;
    /// Scales the head drop and tilt of a slump.
    double amplitude = 1.0;
    /// Defaults to "<kind>-<seed>".
    std::optional<std::string> video_id;
};

/// Deterministic per spec. Falls and slumps are labeled Emergency from their onset,
/// a stand-up is labeled Pause from the moment the hips start to rise.
VideoSequence generate_sequence(const ScenarioSpec& spec);

struct ScenarioGroup {
    ScenarioSpec base;
    int count = 1;
};

struct SynthDatasetSpec {
    Mode mode = Mode::Walking;
    std::uint64_t seed = 0;
    std::vector<ScenarioGroup> groups;
};

/// JSON layout:
/// {"mode": "walking", "seed": 1, "frame_period_ms": 100, "noise_px": 2, "dropout_rate": 0.05,
///  "videos": [{"kind": "fall_during_walk", "count": 30, "duration_frames": 80}, ...]}
/// Top-level noise/dropout/period/amplitude/duration act as defaults for every group.
SynthDatasetSpec synth_spec_from_json(const nlohmann::json& j);

/// Video i gets seed derive_seed(spec.seed, i) and id "v<iii>-<kind>".
Dataset generate_dataset(const SynthDatasetSpec& spec);

} // namespace hed

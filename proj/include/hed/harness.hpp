#pragma once

/// \file harness.hpp
/// \brief Workflow commands behind the command-line tool. Every command writes its
/// artifacts into the output directory and embeds the config, seed and input hashes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hed/calibration.hpp"
#include "hed/classifiers.hpp"
#include "hed/data_model.hpp"
#include "hed/evaluation.hpp"
#include "hed/stream.hpp"
#include "hed/tracking.hpp"

namespace hed {

namespace fs = std::filesystem;

/// Which train-split scores calibrate and tune-delay fit on.
enum class CalibrationSource {
    /// Each train video scored by a model fitted on the other k-1 folds.
    OutOfFold,
    /// Train videos scored by the final model.
    InSample,
};

std::string_view calibration_source_name(CalibrationSource s) noexcept;
CalibrationSource calibration_source_from_string(std::string_view s);

struct RunConfig {
    fs::path dataset;
    /// Separate test dataset. Without it the dataset is split by its split tags
    /// when every video has one, else by a seeded video-level split.
    std::optional<fs::path> test_dataset;
    Mode mode = Mode::Walking;
    Family family = Family::Svm;
    /// Grid document (see grid_from_json). Unset means the default grid of the family.
    std::optional<nlohmann::json> grid;
    std::uint64_t seed = 0;
    int k_folds = 5;
    CalibrationSource calibration_source = CalibrationSource::OutOfFold;
    double test_fraction = 1.0 / 3.0;
    TrackerConfig tracker;
    /// JSON field mapping for imported datasets; unset means the canonical schema.
    std::optional<fs::path> mapping_file;
    fs::path out_dir = "out";

    /// Canonical JSON embedded into every artifact.
    nlohmann::json to_json() const;
    /// Keys: dataset, test_dataset, mode, family, grid (object or path), seed, k_folds,
    /// calibration_source ("out_of_fold" or "in_sample"), test_fraction, gate_radius_px, lock_timeout_ms, field_mapping (path), out.
    /// Relative paths resolve against base_dir.
    static RunConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {});
};

/// Train and test partitions used by every command of a run.
struct RunData {
    Split split;
    std::string train_hash;
    std::string test_hash;
};

/// Throws InvalidArgument when a dataset path does not exist.
RunData load_run_data(const RunConfig& config);

struct TrainOutcome {
    TrainedModel model;
    GridSearchResult cv;
};

/// Writes model.json and cv_summary.json.
TrainOutcome cmd_train(const RunConfig& config);

/// Youden threshold for walking (two classes), emergency threshold grid otherwise,
/// fitted on train-split scores chosen by config.calibration_source. Writes calibration.json, threshold_curve.csv and for
/// binary calibrations roc.csv.
Calibration cmd_calibrate(const RunConfig& config, const fs::path& model_file);

/// Fitted on the same train-split scores as the calibration. Writes delay.json and delay_curve.csv.
DelayOptimization cmd_tune_delay(const RunConfig& config, const fs::path& model_file, const fs::path& calibration_file);

/// Refuses artifacts fitted on the test split (SplitLeak). Writes report.json,
/// report.txt, predictions.jsonl and events.jsonl.
EvaluationReport cmd_evaluate(const RunConfig& config, const fs::path& model_file, const fs::path& calibration_file,
                              const fs::path& delay_file);

struct ReplayOptions {
    fs::path model_file;
    fs::path calibration_file;
    /// Unset means no delay.
    std::optional<fs::path> delay_file;
    fs::path stream_file;
    fs::path out_dir = "out";
    /// Sleep until each frame's timestamp, as a live 10 Hz camera would deliver it.
    bool paced = false;
    TrackerConfig tracker;
};

struct ReplayResult {
    std::vector<std::int64_t> timestamps_ms;
    /// Unset for frames without a tracked patient.
    std::vector<std::optional<ClassLabel>> raw;
    std::vector<ClassLabel> committed;
    std::vector<EmergencyEvent> events;
    /// Wall-clock processing time per frame.
    std::vector<double> frame_latency_ms;
    double wall_seconds = 0.0;

    double frames_per_second() const noexcept;
    double max_latency_ms() const noexcept;
    double mean_latency_ms() const noexcept;
};

/// Sequential replay of one canonical JSONL stream. Writes replay_labels.jsonl and events.jsonl.
ReplayResult cmd_replay(const ReplayOptions& options);

/// Generates the dataset described by a synth spec file into out_dir.
/// A seed, when given, overrides the spec's seed.
Dataset cmd_synth(const fs::path& spec_file, const fs::path& out_dir, std::optional<std::uint64_t> seed = std::nullopt);

/// Stable JSON text used for every artifact: sorted keys, 2-space indent, trailing newline.
void write_json_file(const nlohmann::json& j, const fs::path& file);
nlohmann::json read_json_file(const fs::path& file);
/// FNV-1a fingerprint of a file's bytes.
std::string file_hash(const fs::path& file);

} // namespace hed

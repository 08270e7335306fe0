#pragma once

/// \file data_model.hpp
/// \brief Keypoint/frame/video types, the JSONL dataset format and video-level splits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hed/common.hpp"

namespace hed {

/// BODY_25 keypoint layout.
constexpr int kNumKeypoints = 25;
constexpr double kImageWidth = 480.0;
constexpr double kImageHeight = 360.0;

namespace body25 {
enum : int {
    Nose = 0, Neck, RShoulder, RElbow, RWrist, LShoulder, LElbow, LWrist,
    MidHip, RHip, RKnee, RAnkle, LHip, LKnee, LAnkle,
    REye, LEye, REar, LEar, LBigToe, LSmallToe, LHeel, RBigToe, RSmallToe, RHeel,
};
} // namespace body25

enum class ClassLabel : int { Normal = 0, Emergency = 1, Pause = 2 };
constexpr int kNumClasses = 3;

constexpr int to_int(ClassLabel l) noexcept { return static_cast<int>(l); }
/// Throws UnknownLabel for ids outside {0,1,2}.
ClassLabel label_from_int(std::int64_t id);
std::string_view label_name(ClassLabel l) noexcept;

enum class Mode { Walking, Wheelchair, Combined };

std::string_view mode_name(Mode m) noexcept;
Mode mode_from_string(std::string_view s);
/// Walking is a 2-class problem, the other modes have 3 classes.
inline int num_classes(Mode m) noexcept { return m == Mode::Walking ? 2 : 3; }

struct PixelPoint {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const PixelPoint&) const = default;
};

/// A keypoint with confidence 0 is missing; its coordinates are zero and it carries no depth.
struct Keypoint {
    double x_px = 0.0;
    double y_px = 0.0;
    double confidence = 0.0;
    std::optional<double> depth_m;

    bool missing() const noexcept { return confidence <= 0.0; }
    bool operator==(const Keypoint&) const = default;
};

struct Skeleton {
    std::array<Keypoint, kNumKeypoints> keypoints{};
    int person_index = 0;

    int present_count() const noexcept;
    bool operator==(const Skeleton&) const = default;
};

struct PoseFrame {
    std::int64_t timestamp_ms = 0;
    std::vector<Skeleton> skeletons;
    std::optional<PixelPoint> marker_px;
    ClassLabel label = ClassLabel::Normal;

    bool operator==(const PoseFrame&) const = default;
};

struct VideoSequence {
    std::string video_id;
    std::vector<PoseFrame> frames;
    Mode mode = Mode::Walking;
    int frame_period_ms = 100;
    std::string camera;
    std::string location;
    /// Optional train/test flag carried by a published split.
    std::optional<std::string> split_tag;
};

struct Dataset {
    std::vector<VideoSequence> sequences;
    Mode mode = Mode::Walking;

    std::size_t frame_count() const noexcept;
};

/// Key names and layout of a frame record. The defaults are the canonical schema;
/// other layouts of the published keypoint subset are read by overriding them.
struct FieldMapping {
    std::string time_key = "t";
    std::string label_key = "label";
    std::string marker_key = "marker";
    std::string skeletons_key = "skeletons";
    std::string id_key = "id";
    std::string keypoints_key = "kp";
    /// kp given as one flat array of 25*stride numbers instead of 25 tuples.
    bool flat_keypoints = false;
    /// Values per keypoint in flat layout: 3 (x,y,conf) or 4 (x,y,conf,depth).
    int flat_stride = 4;
    /// Source label id -> class id. Empty means identity.
    std::map<std::int64_t, std::int64_t> label_map;

    static FieldMapping from_json_file(const std::filesystem::path& path);
};

PoseFrame parse_frame_record(std::string_view line, const FieldMapping& mapping = {});
/// Canonical single-line JSON; inverse of parse_frame_record with the default mapping.
std::string serialize_frame_record(const PoseFrame& frame);

Dataset load_dataset(const std::filesystem::path& dir, Mode mode, const FieldMapping& mapping = {});
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Parse a single video file (one frame per line).
VideoSequence load_video_file(const std::filesystem::path& file, std::string video_id, Mode mode,
                              int frame_period_ms = 100, const FieldMapping& mapping = {});

/// Frame counts indexed by class id.
std::array<std::size_t, kNumClasses> class_distribution(const Dataset& dataset);

struct Split {
    Dataset train;
    Dataset test;
};

Split split_videos(const Dataset& dataset, double test_fraction, std::uint64_t seed);
/// Honour the per-video split_tag ("train"/"test") of a published split.
Split split_by_tag(const Dataset& dataset);

struct Fold {
    Dataset train;
    Dataset validation;
};

std::vector<Fold> kfold_videos(const Dataset& dataset, int k, std::uint64_t seed);

/// Fingerprint of a dataset's content (video ids, periods and every frame record).
std::string dataset_hash(const Dataset& dataset);

} // namespace hed

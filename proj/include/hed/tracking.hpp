#pragma once

/// \file tracking.hpp
/// \brief Patient selection among several detected skeletons and depth fusion.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>

#include <Eigen/Core>

#include "hed/data_model.hpp"

namespace hed {

struct TrackerConfig {
    double gate_radius_px = 150.0;
    std::int64_t lock_timeout_ms = 2000;
};

struct TrackState {
    std::optional<PixelPoint> last_center_px;
    std::optional<std::int64_t> last_seen_ms;
    std::int64_t lock_timeout_ms = 2000;
};

struct PatientFrame {
    std::int64_t timestamp_ms = 0;
    Skeleton skeleton;
    ClassLabel label = ClassLabel::Normal;
};

/// Mean of the present torso keypoints (neck, mid-hip, shoulders, hips), falling
/// back to the mean of all present keypoints.
PixelPoint torso_center(const Skeleton& skeleton);

struct BoundingBox {
    double x0, y0, x1, y1;
    bool contains(PixelPoint p) const noexcept { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

BoundingBox bounding_box(const Skeleton& skeleton);

/// Selection priority: marker (box containment, then nearest within the gate),
/// then nearest to the last tracked center within the gate, then nearest to the
/// image center when no lock is held. The lock is dropped after lock_timeout_ms
/// without a selection.
std::pair<std::optional<PatientFrame>, TrackState>
select_patient(const PoseFrame& frame, const TrackState& state, const TrackerConfig& config = {});

/// Row-major depth image in meters. Cells equal to the hole value are invalid.
struct DepthMap {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> depth;
    float hole_value = 0.0f;

    int width() const noexcept { return static_cast<int>(depth.cols()); }
    int height() const noexcept { return static_cast<int>(depth.rows()); }
    bool valid(int row, int col) const noexcept;
};

/// Binary layout: uint32 width, uint32 height, float32 hole value, then
/// width*height float32 cells, row-major, little-endian.
DepthMap read_depth_map(const std::filesystem::path& file);
void write_depth_map(const DepthMap& map, const std::filesystem::path& file);

constexpr int kDepthWindow = 5;

/// Assign each present keypoint the median valid depth of the 5x5 window around it.
Skeleton fuse_depth(const Skeleton& skeleton, const DepthMap& map);

} // namespace hed

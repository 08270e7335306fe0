#pragma once

/// \file features.hpp
/// \brief Skeleton-normalized feature encoding of the tracked patient.
///
/// Every keypoint contributes four entries (x_rel, y_rel, depth_rel, confidence):
/// pixel coordinates relative to the neck (or the centroid of the present
/// keypoints when the neck is missing), divided by the torso length (neck to
/// mid-hip, or the bounding-box diagonal when either is missing), and the depth
/// offset from the patient's median depth. Missing keypoints encode as zeros.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hed/data_model.hpp"
#include "hed/tracking.hpp"

namespace hed {

constexpr int kFeaturesPerKeypoint = 4;
constexpr int kFeatureDim = kNumKeypoints * kFeaturesPerKeypoint;

template <typename Scalar>
using FeatureVectorT = Eigen::Matrix<Scalar, kFeatureDim, 1>;
using FeatureVector = FeatureVectorT<double>;

template <typename Scalar = double>
FeatureVectorT<Scalar> extract_features(const Skeleton& skeleton) {
    using namespace body25;
    const auto& kp = skeleton.keypoints;
    if (skeleton.present_count() < 2) {
        throw Error(Errc::NotEnoughKeypoints, "need at least 2 detected keypoints");
    }

    Scalar ref_x = 0, ref_y = 0;
    const Keypoint& neck = kp[Neck];
    if (!neck.missing()) {
        ref_x = Scalar(neck.x_px);
        ref_y = Scalar(neck.y_px);
    } else {
        int n = 0;
        for (const auto& k : kp) {
            if (k.missing()) continue;
            ref_x += Scalar(k.x_px);
            ref_y += Scalar(k.y_px);
            ++n;
        }
        ref_x /= Scalar(n);
        ref_y /= Scalar(n);
    }

    Scalar scale = 0;
    const Keypoint& hip = kp[MidHip];
    if (!neck.missing() && !hip.missing()) {
        scale = std::hypot(Scalar(neck.x_px - hip.x_px), Scalar(neck.y_px - hip.y_px));
    }
    if (!(scale > Scalar(0))) {
        const auto box = bounding_box(skeleton);
        scale = std::hypot(Scalar(box.x1 - box.x0), Scalar(box.y1 - box.y0));
    }
    if (!(scale > Scalar(0))) scale = Scalar(1);

    std::vector<double> depths;
    for (const auto& k : kp)
        if (!k.missing() && k.depth_m) depths.push_back(*k.depth_m);
    Scalar median_depth = 0;
    if (!depths.empty()) {
        std::sort(depths.begin(), depths.end());
        const std::size_t m = depths.size() / 2;
        median_depth = depths.size() % 2 ? Scalar(depths[m]) : Scalar(0.5 * (depths[m - 1] + depths[m]));
    }

    FeatureVectorT<Scalar> f = FeatureVectorT<Scalar>::Zero();
    for (int i = 0; i < kNumKeypoints; ++i) {
        const Keypoint& k = kp[static_cast<std::size_t>(i)];
        if (k.missing()) continue;
        const int o = i * kFeaturesPerKeypoint;
        f[o + 0] = (Scalar(k.x_px) - ref_x) / scale;
        f[o + 1] = (Scalar(k.y_px) - ref_y) / scale;
        f[o + 2] = k.depth_m ? Scalar(*k.depth_m) - median_depth : Scalar(0);
        f[o + 3] = Scalar(k.confidence);
    }
    return f;
}

template <typename Scalar = double>
FeatureVectorT<Scalar> extract_features(const PatientFrame& patient) {
    return extract_features<Scalar>(patient.skeleton);
}

/// Classifier-ready samples of one video: one row per frame in which a patient
/// was tracked with enough keypoints.
struct VideoSamples {
    std::string video_id;
    int frame_period_ms = 100;
    Eigen::MatrixXd features; ///< rows = samples
    std::vector<ClassLabel> labels;
    std::vector<std::int64_t> timestamps_ms;
    std::vector<std::size_t> frame_index;

    std::size_t size() const noexcept { return labels.size(); }
};

VideoSamples extract_video_samples(const VideoSequence& video, const TrackerConfig& config = {});
std::vector<VideoSamples> extract_dataset_samples(const Dataset& dataset, const TrackerConfig& config = {});

/// Stack the samples of several videos.
struct SampleSet {
    Eigen::MatrixXd features;
    std::vector<ClassLabel> labels;
};

SampleSet stack_samples(const std::vector<const VideoSamples*>& videos);
SampleSet stack_samples(const std::vector<VideoSamples>& videos);

/// Debug dump: video, t, label, then the 100 feature columns.
void write_features_csv(const std::vector<VideoSamples>& videos, const std::filesystem::path& file);

} // namespace hed

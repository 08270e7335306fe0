#include "hed/features.hpp"

#include <cstdio>
#include <fstream>

namespace hed {

VideoSamples extract_video_samples(const VideoSequence& video, const TrackerConfig& config) {
    VideoSamples out;
    out.video_id = video.video_id;
    out.frame_period_ms = video.frame_period_ms;

    std::vector<FeatureVector> rows;
    rows.reserve(video.frames.size());
    TrackState state;
    state.lock_timeout_ms = config.lock_timeout_ms;
    for (std::size_t i = 0; i < video.frames.size(); ++i) {
        const auto& frame = video.frames[i];
        auto [patient, next] = select_patient(frame, state, config);
        state = next;
        if (!patient || patient->skeleton.present_count() < 2) continue;
        rows.push_back(extract_features(*patient));
        out.labels.push_back(frame.label);
        out.timestamps_ms.push_back(frame.timestamp_ms);
        out.frame_index.push_back(i);
    }
    out.features.resize(static_cast<Eigen::Index>(rows.size()), kFeatureDim);
    for (std::size_t r = 0; r < rows.size(); ++r) out.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    return out;
}

std::vector<VideoSamples> extract_dataset_samples(const Dataset& dataset, const TrackerConfig& config) {
    std::vector<VideoSamples> out;
    out.reserve(dataset.sequences.size());
    for (const auto& v : dataset.sequences) out.push_back(extract_video_samples(v, config));
    return out;
}

SampleSet stack_samples(const std::vector<const VideoSamples*>& videos) {
    Eigen::Index rows = 0, cols = kFeatureDim;
    for (const auto* v : videos) {
        rows += v->features.rows();
        if (v->features.rows() > 0) cols = v->features.cols();
    }
    SampleSet s;
    s.features.resize(rows, cols);
    s.labels.reserve(static_cast<std::size_t>(rows));
    Eigen::Index r = 0;
    for (const auto* v : videos) {
        if (v->features.rows() == 0) continue;
        s.features.middleRows(r, v->features.rows()) = v->features;
        r += v->features.rows();
        s.labels.insert(s.labels.end(), v->labels.begin(), v->labels.end());
    }
    return s;
}

SampleSet stack_samples(const std::vector<VideoSamples>& videos) {
    std::vector<const VideoSamples*> ptrs;
    ptrs.reserve(videos.size());
    for (const auto& v : videos) ptrs.push_back(&v);
    return stack_samples(ptrs);
}

void write_features_csv(const std::vector<VideoSamples>& videos, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    out << "video,t_ms,label";
    for (int i = 0; i < kNumKeypoints; ++i) out << ",x" << i << ",y" << i << ",d" << i << ",c" << i;
    out << '\n';
    char buf[32];
    for (const auto& v : videos) {
        for (Eigen::Index r = 0; r < v.features.rows(); ++r) {
            out << v.video_id << ',' << v.timestamps_ms[static_cast<std::size_t>(r)] << ','
                << to_int(v.labels[static_cast<std::size_t>(r)]);
            for (Eigen::Index c = 0; c < v.features.cols(); ++c) {
                std::snprintf(buf, sizeof buf, ",%.9g", v.features(r, c));
                out << buf;
            }
            out << '\n';
        }
    }
}

} // namespace hed

#include "hed/tracking.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace hed {

PixelPoint torso_center(const Skeleton& skeleton) {
    using namespace body25;
    static constexpr int torso[] = {Neck, MidHip, RShoulder, LShoulder, RHip, LHip};
    double sx = 0.0, sy = 0.0;
    int n = 0;
    for (int i : torso) {
        const auto& k = skeleton.keypoints[static_cast<std::size_t>(i)];
        if (!k.missing()) {
            sx += k.x_px;
            sy += k.y_px;
            ++n;
        }
    }
    if (n == 0) {
        for (const auto& k : skeleton.keypoints) {
            if (!k.missing()) {
                sx += k.x_px;
                sy += k.y_px;
                ++n;
            }
        }
    }
    if (n == 0) return {};
    return {sx / n, sy / n};
}

BoundingBox bounding_box(const Skeleton& skeleton) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    BoundingBox b{inf, inf, -inf, -inf};
    for (const auto& k : skeleton.keypoints) {
        if (k.missing()) continue;
        b.x0 = std::min(b.x0, k.x_px);
        b.y0 = std::min(b.y0, k.y_px);
        b.x1 = std::max(b.x1, k.x_px);
        b.y1 = std::max(b.y1, k.y_px);
    }
    return b;
}

namespace {

double distance(PixelPoint a, PixelPoint b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Nearest {
    std::size_t index;
    double dist;
};

Nearest nearest_to(const std::vector<Skeleton>& skels, PixelPoint p) {
    Nearest best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < skels.size(); ++i) {
        const double d = distance(torso_center(skels[i]), p);
        if (d < best.dist) best = {i, d};
    }
    return best;
}

} // namespace

std::pair<std::optional<PatientFrame>, TrackState>
select_patient(const PoseFrame& frame, const TrackState& state, const TrackerConfig& config) {
    TrackState next = state;
    if (next.last_seen_ms && frame.timestamp_ms - *next.last_seen_ms > next.lock_timeout_ms) {
        next.last_center_px.reset();
        next.last_seen_ms.reset();
    }
    if (frame.skeletons.empty()) return {std::nullopt, next};

    std::optional<std::size_t> chosen;
    if (frame.marker_px) {
        const PixelPoint m = *frame.marker_px;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < frame.skeletons.size(); ++i) {
            if (!bounding_box(frame.skeletons[i]).contains(m)) continue;
            const double d = distance(torso_center(frame.skeletons[i]), m);
            if (d < best) {
                best = d;
                chosen = i;
            }
        }
        if (!chosen) {
            const auto n = nearest_to(frame.skeletons, m);
            if (n.dist <= config.gate_radius_px) chosen = n.index;
        }
    } else if (next.last_center_px) {
        const auto n = nearest_to(frame.skeletons, *next.last_center_px);
        if (n.dist <= config.gate_radius_px) chosen = n.index;
    } else {
        chosen = nearest_to(frame.skeletons, {kImageWidth / 2.0, kImageHeight / 2.0}).index;
    }

    if (!chosen) return {std::nullopt, next};

    const Skeleton& sk = frame.skeletons[*chosen];
    next.last_center_px = torso_center(sk);
    next.last_seen_ms = frame.timestamp_ms;
    return {PatientFrame{frame.timestamp_ms, sk, frame.label}, next};
}

bool DepthMap::valid(int row, int col) const noexcept {
    const float v = depth(row, col);
    return std::isfinite(v) && v != hole_value && v > 0.0f;
}

namespace {

static_assert(std::endian::native == std::endian::little, "depth map IO assumes a little-endian host");

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw Error(Errc::MalformedRecord, "truncated depth map");
}

} // namespace

DepthMap read_depth_map(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot open " + file.string());
    std::uint32_t w = 0, h = 0;
    DepthMap map;
    read_pod(in, w);
    read_pod(in, h);
    read_pod(in, map.hole_value);
    if (w == 0 || h == 0 || w > 16384 || h > 16384) throw Error(Errc::MalformedRecord, "implausible depth map size");
    map.depth.resize(h, w);
    in.read(reinterpret_cast<char*>(map.depth.data()), static_cast<std::streamsize>(sizeof(float) * w * h));
    if (!in) throw Error(Errc::MalformedRecord, "truncated depth map");
    return map;
}

void write_depth_map(const DepthMap& map, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    const auto w = static_cast<std::uint32_t>(map.width());
    const auto h = static_cast<std::uint32_t>(map.height());
    out.write(reinterpret_cast<const char*>(&w), sizeof w);
    out.write(reinterpret_cast<const char*>(&h), sizeof h);
    out.write(reinterpret_cast<const char*>(&map.hole_value), sizeof map.hole_value);
    out.write(reinterpret_cast<const char*>(map.depth.data()),
              static_cast<std::streamsize>(sizeof(float) * map.depth.size()));
}

Skeleton fuse_depth(const Skeleton& skeleton, const DepthMap& map) {
    constexpr int r = kDepthWindow / 2;
    Skeleton out = skeleton;
    std::vector<float> window;
    window.reserve(kDepthWindow * kDepthWindow);
    for (auto& k : out.keypoints) {
        if (k.missing()) {
            k.depth_m.reset();
            continue;
        }
        const auto col = static_cast<long>(std::lround(k.x_px));
        const auto row = static_cast<long>(std::lround(k.y_px));
        if (col < 0 || row < 0 || col >= map.width() || row >= map.height()) {
            throw Error(Errc::OutOfBounds, "keypoint (" + std::to_string(k.x_px) + ", " + std::to_string(k.y_px) +
                                               ") outside depth map");
        }
        window.clear();
        for (long y = std::max(0L, row - r); y <= std::min<long>(map.height() - 1, row + r); ++y)
            for (long x = std::max(0L, col - r); x <= std::min<long>(map.width() - 1, col + r); ++x)
                if (map.valid(static_cast<int>(y), static_cast<int>(x))) window.push_back(map.depth(y, x));
        if (window.empty()) {
            k.depth_m.reset();
            continue;
        }
        std::sort(window.begin(), window.end());
        const std::size_t m = window.size() / 2;
        k.depth_m = window.size() % 2 ? double(window[m]) : 0.5 * (double(window[m - 1]) + double(window[m]));
    }
    return out;
}

} // namespace hed

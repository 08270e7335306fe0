#include "hed/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Core>

namespace hed {

std::string_view scenario_name(ScenarioKind k) noexcept {
    switch (k) {
    case ScenarioKind::Walk: return "walk";
    case ScenarioKind::FallDuringWalk: return "fall_during_walk";
    case ScenarioKind::SitWheelchair: return "sit_wheelchair";
    case ScenarioKind::SlumpUnconscious: return "slump_unconscious";
    case ScenarioKind::StandUpPause: return "stand_up_pause";
    case ScenarioKind::Bystanders: return "bystanders";
    }
    return "?";
}

ScenarioKind scenario_from_string(std::string_view s) {
    for (auto k : {ScenarioKind::Walk, ScenarioKind::FallDuringWalk, ScenarioKind::SitWheelchair,
                   ScenarioKind::SlumpUnconscious, ScenarioKind::StandUpPause, ScenarioKind::Bystanders}) {
        if (scenario_name(k) == s) return k;
    }
    throw Error(Errc::InvalidSpec, "unknown scenario kind '" + std::string(s) + "'");
}

namespace {

using namespace body25;
using Vec2 = Eigen::Vector2d;
/// Body-frame pose: origin at mid-hip, one unit = neck to mid-hip, y pointing down.
using Pose = std::array<Vec2, kNumKeypoints>;

constexpr int kHead[] = {Nose, REye, LEye, REar, LEar};
constexpr int kLowerBody[] = {RKnee, RAnkle, LKnee, LAnkle, LBigToe, LSmallToe, LHeel, RBigToe, RSmallToe, RHeel};

Pose standing_pose() {
    Pose p;
    p[Nose] = {0.0, -1.35};
    p[Neck] = {0.0, -1.0};
    p[RShoulder] = {-0.35, -1.0};
    p[RElbow] = {-0.42, -0.55};
    p[RWrist] = {-0.45, -0.10};
    p[LShoulder] = {0.35, -1.0};
    p[LElbow] = {0.42, -0.55};
    p[LWrist] = {0.45, -0.10};
    p[MidHip] = {0.0, 0.0};
    p[RHip] = {-0.20, 0.0};
    p[RKnee] = {-0.20, 0.85};
    p[RAnkle] = {-0.20, 1.70};
    p[LHip] = {0.20, 0.0};
    p[LKnee] = {0.20, 0.85};
    p[LAnkle] = {0.20, 1.70};
    p[REye] = {-0.06, -1.42};
    p[LEye] = {0.06, -1.42};
    p[REar] = {-0.12, -1.38};
    p[LEar] = {0.12, -1.38};
    p[LBigToe] = {0.15, 1.82};
    p[LSmallToe] = {0.25, 1.82};
    p[LHeel] = {0.22, 1.76};
    p[RBigToe] = {-0.15, 1.82};
    p[RSmallToe] = {-0.25, 1.82};
    p[RHeel] = {-0.22, 1.76};
    return p;
}

Pose seated_pose() {
    Pose p = standing_pose();
    p[RElbow] = {-0.45, -0.45};
    p[LElbow] = {0.45, -0.45};
    p[RWrist] = {-0.32, 0.05};
    p[LWrist] = {0.32, 0.05};
    // thighs point at the camera and are foreshortened
    p[RKnee] = {-0.22, 0.25};
    p[LKnee] = {0.22, 0.25};
    p[RAnkle] = {-0.22, 0.95};
    p[LAnkle] = {0.22, 0.95};
    p[RHeel] = {-0.24, 1.00};
    p[LHeel] = {0.24, 1.00};
    p[RBigToe] = {-0.17, 1.06};
    p[RSmallToe] = {-0.27, 1.06};
    p[LBigToe] = {0.17, 1.06};
    p[LSmallToe] = {0.27, 1.06};
    return p;
}

// depth offsets (m) relative to the body plane
constexpr std::array<double, kNumKeypoints> kDepthOffset = {
    -0.08, 0.0, 0.0, -0.03, -0.06, 0.0, -0.03, -0.06, 0.0, 0.0, -0.02, 0.0, 0.0,
    -0.02, 0.0, -0.06, -0.06, -0.02, -0.02, -0.08, -0.07, 0.03, -0.08, -0.07, 0.03};

Pose lerp(const Pose& a, const Pose& b, double s) {
    Pose out;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - s) * a[i] + s * b[i];
    return out;
}

Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

void rotate_about(Pose& p, const Vec2& pivot, double angle) {
    for (auto& v : p) v = pivot + rotate(v - pivot, angle);
}

void apply_gait(Pose& p, double phase, double amp) {
    const double r = std::max(0.0, std::sin(phase)) * amp;
    const double l = std::max(0.0, std::sin(phase + M_PI)) * amp;
    for (int i : {RKnee}) p[i].y() -= 0.12 * r;
    for (int i : {RAnkle, RHeel, RBigToe, RSmallToe}) p[i].y() -= 0.22 * r;
    for (int i : {LKnee}) p[i].y() -= 0.12 * l;
    for (int i : {LAnkle, LHeel, LBigToe, LSmallToe}) p[i].y() -= 0.22 * l;
    const double swing = 0.06 * amp * std::sin(phase);
    p[RWrist].y() -= swing;
    p[LWrist].y() += swing;
    p[RElbow].y() -= 0.5 * swing;
    p[LElbow].y() += 0.5 * swing;
    const double sway = 0.03 * amp * std::sin(phase);
    for (auto& v : p) v.x() += sway;
}

/// Head drop and sideways tilt about the neck, with slight slouching of the shoulders.
void apply_head(Pose& p, double drop, double tilt) {
    const Vec2 neck = p[Neck];
    for (int i : kHead) p[i] = neck + rotate(p[i] - neck, tilt) + Vec2(0.0, drop);
    p[Neck].y() += 0.3 * drop;
    p[RShoulder].y() += 0.15 * drop;
    p[LShoulder].y() += 0.15 * drop;
}

struct Placement {
    double cx;      // mid-hip pixel x
    double cy;      // mid-hip pixel y
    double unit_px; // pixels per body unit
    double depth_m;
};

struct RenderNoise {
    double noise_px;
    double dropout;
    double lower_body_dropout;
};

std::optional<Skeleton> render(const Pose& pose, const Placement& at, const RenderNoise& noise, int person_index,
                               Rng& rng, bool ensure_two) {
    Skeleton sk;
    sk.person_index = person_index;
    for (int i = 0; i < kNumKeypoints; ++i) {
        const auto u = static_cast<std::size_t>(i);
        double x = at.cx + at.unit_px * pose[u].x() + rng.normal(0.0, noise.noise_px);
        double y = at.cy + at.unit_px * pose[u].y() + rng.normal(0.0, noise.noise_px);
        double conf = std::clamp(rng.normal(0.75, 0.12), 0.05, 1.0);
        const bool lower = std::find(std::begin(kLowerBody), std::end(kLowerBody), i) != std::end(kLowerBody);
        bool dropped = rng.bernoulli(noise.dropout) || (lower && rng.bernoulli(noise.lower_body_dropout));
        const double depth = at.depth_m + kDepthOffset[u] + rng.normal(0.0, 0.02);
        const bool hole = rng.bernoulli(0.02);
        if (x < 0 || y < 0 || x >= kImageWidth || y >= kImageHeight) dropped = true;
        if (dropped) continue;
        sk.keypoints[u] = Keypoint{x, y, conf, hole ? std::nullopt : std::optional<double>(depth)};
    }
    if (ensure_two && sk.present_count() < 2) {
        for (int i : {Neck, MidHip}) {
            const auto u = static_cast<std::size_t>(i);
            const double x = std::clamp(at.cx + at.unit_px * pose[u].x(), 0.0, kImageWidth - 1);
            const double y = std::clamp(at.cy + at.unit_px * pose[u].y(), 0.0, kImageHeight - 1);
            sk.keypoints[u] = Keypoint{x, y, 0.5, at.depth_m};
        }
    }
    if (sk.present_count() == 0) return std::nullopt;
    return sk;
}

/// Slowly varying value built from two sinusoids with random phase.
struct Wobble {
    double a1, a2, f1, f2, p1, p2;
    Wobble(Rng& rng, double amp, double period_frames)
        : a1(amp * rng.uniform(0.3, 0.7)), a2(amp * rng.uniform(0.1, 0.3)),
          f1(2 * M_PI / (period_frames * rng.uniform(0.8, 1.25))), f2(2 * M_PI / (period_frames * rng.uniform(0.3, 0.5))),
          p1(rng.uniform(0, 2 * M_PI)), p2(rng.uniform(0, 2 * M_PI)) {}
    double operator()(double t) const { return a1 * std::sin(f1 * t + p1) + a2 * std::sin(f2 * t + p2); }
};

double unit_px_at(double depth_m) { return 125.0 / depth_m; }

void validate(const ScenarioSpec& spec) {
    if (spec.duration_frames < 10) throw Error(Errc::InvalidSpec, "duration must be >= 10 frames");
    if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw Error(Errc::InvalidSpec, "dropout_rate must be in [0,1)");
    if (!(spec.noise_px >= 0.0) || !std::isfinite(spec.noise_px)) throw Error(Errc::InvalidSpec, "noise_px must be >= 0");
    if (spec.frame_period_ms <= 0) throw Error(Errc::InvalidSpec, "frame_period_ms must be > 0");
    if (!(spec.amplitude >= 0.0) || !std::isfinite(spec.amplitude)) throw Error(Errc::InvalidSpec, "amplitude must be >= 0");
}

} // namespace

VideoSequence generate_sequence(const ScenarioSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const int n = spec.duration_frames;
    const bool seated = spec.kind == ScenarioKind::SitWheelchair || spec.kind == ScenarioKind::SlumpUnconscious ||
                        spec.kind == ScenarioKind::StandUpPause;

    VideoSequence seq;
    seq.video_id = spec.video_id.value_or(std::string(scenario_name(spec.kind)) + "-" + std::to_string(spec.seed));
    seq.mode = seated ? Mode::Wheelchair : Mode::Walking;
    seq.frame_period_ms = spec.frame_period_ms;
    seq.camera = "synthetic";
    seq.location = "synthetic";

    const RenderNoise noise{spec.noise_px, spec.dropout_rate, seated ? 0.25 : 0.0};
    const double depth0 = rng.uniform(2.0, 3.0);
    const double cx0 = rng.uniform(210.0, 270.0);
    const double stride_frames = rng.uniform(9.0, 12.0);
    const double gait_amp = rng.uniform(0.8, 1.2);
    const Wobble drift(rng, 20.0, 60.0);
    const Wobble depth_drift(rng, 0.15, 80.0);
    const Wobble nod(rng, 0.05, 25.0);
    const Wobble nod_tilt(rng, 0.08, 30.0);

    // event timing
    const int onset = static_cast<int>(std::lround(rng.uniform(0.35, 0.55) * n));
    const int transition = static_cast<int>(5 + rng.below(6)); // 5..10 frames
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double slump_drop = spec.amplitude * rng.uniform(0.06, 0.22);
    const double slump_tilt = spec.amplitude * rng.uniform(0.10, 0.38) * side;

    // distractors
    struct Distractor {
        double offset_x, depth, phase0;
        Wobble w;
    };
    std::vector<Distractor> distractors;
    bool use_marker = false;
    if (spec.kind == ScenarioKind::Bystanders) {
        const int count = 1 + static_cast<int>(rng.below(4));
        for (int d = 0; d < count; ++d) {
            const double s = rng.bernoulli(0.5) ? 1.0 : -1.0;
            distractors.push_back({s * rng.uniform(170.0, 215.0), rng.uniform(2.2, 4.0), rng.uniform(0, 2 * M_PI),
                                   Wobble(rng, 8.0, 40.0)});
        }
        use_marker = rng.bernoulli(0.5);
    }

    const Pose stand = standing_pose();
    const Pose sit = seated_pose();
    double fall_phase = 0.0;

    for (int i = 0; i < n; ++i) {
        const double t = i;
        PoseFrame frame;
        frame.timestamp_ms = static_cast<std::int64_t>(i) * spec.frame_period_ms;
        Placement at{};
        at.depth_m = depth0 + depth_drift(t);
        at.unit_px = unit_px_at(at.depth_m);
        Pose pose;

        switch (spec.kind) {
        case ScenarioKind::Walk:
        case ScenarioKind::Bystanders:
        case ScenarioKind::FallDuringWalk: {
            const double phase = 2 * M_PI * t / stride_frames;
            at.cx = cx0 + drift(t);
            at.cy = 180.0;
            pose = stand;
            if (spec.kind == ScenarioKind::FallDuringWalk && i >= onset) {
                if (i == onset) fall_phase = phase;
                const int f = i - onset + 1;
                const double s = std::min(1.0, static_cast<double>(f) / transition);
                at.cx = cx0 + drift(onset);
                apply_gait(pose, fall_phase, gait_amp * (1.0 - s));
                const double angle = side * (M_PI / 2) * s + (s >= 1.0 ? 0.04 * std::sin(0.3 * t) : 0.0);
                rotate_about(pose, Vec2(0.0, 1.7), angle);
                frame.label = ClassLabel::Emergency;
            } else {
                apply_gait(pose, phase, gait_amp);
                at.cy += 2.0 * std::sin(2 * phase);
            }
            break;
        }
        case ScenarioKind::SitWheelchair:
        case ScenarioKind::SlumpUnconscious: {
            at.cx = cx0 + 0.3 * drift(t);
            at.cy = 200.0;
            pose = sit;
            double drop = std::max(0.0, nod(t));
            double tilt = nod_tilt(t);
            if (spec.kind == ScenarioKind::SlumpUnconscious && i >= onset) {
                const double s = std::min(1.0, static_cast<double>(i - onset + 1) / (2 * transition));
                drop = (1.0 - s) * drop + s * slump_drop;
                tilt = (1.0 - s) * tilt + s * slump_tilt;
                frame.label = ClassLabel::Emergency;
            }
            apply_head(pose, drop, tilt);
            break;
        }
        case ScenarioKind::StandUpPause: {
            at.cx = cx0 + 0.3 * drift(t);
            const double floor_y = 200.0 + 1.06 * unit_px_at(depth0);
            double s = 0.0;
            if (i >= onset) {
                s = std::min(1.0, static_cast<double>(i - onset + 1) / (transition + 5));
                frame.label = ClassLabel::Pause;
            }
            pose = lerp(sit, stand, s);
            apply_head(pose, (1.0 - s) * std::max(0.0, nod(t)), (1.0 - s) * nod_tilt(t));
            const double feet = (1.0 - s) * 1.06 + s * 1.82;
            at.cy = floor_y - feet * at.unit_px;
            break;
        }
        }

        auto patient = render(pose, at, noise, 0, rng, true);
        frame.skeletons.push_back(*patient);
        if (use_marker) {
            const Vec2 chest = 0.5 * (pose[Neck] + pose[MidHip]);
            frame.marker_px = PixelPoint{at.cx + at.unit_px * chest.x(), at.cy + at.unit_px * chest.y()};
        }
        for (std::size_t d = 0; d < distractors.size(); ++d) {
            const auto& ds = distractors[d];
            Pose dp = stand;
            apply_gait(dp, ds.phase0 + 2 * M_PI * t / 10.0, 1.0);
            Placement dat{at.cx + ds.offset_x + ds.w(t), 180.0 + 20.0 * (ds.depth - 2.5), unit_px_at(ds.depth), ds.depth};
            if (auto s = render(dp, dat, noise, static_cast<int>(d + 1), rng, false)) frame.skeletons.push_back(*s);
        }
        seq.frames.push_back(std::move(frame));
    }
    return seq;
}

SynthDatasetSpec synth_spec_from_json(const nlohmann::json& j) {
    try {
        SynthDatasetSpec spec;
        spec.mode = mode_from_string(j.at("mode").get<std::string>());
        spec.seed = j.value("seed", std::uint64_t{0});
        ScenarioSpec defaults;
        defaults.noise_px = j.value("noise_px", defaults.noise_px);
        defaults.dropout_rate = j.value("dropout_rate", defaults.dropout_rate);
        defaults.frame_period_ms = j.value("frame_period_ms", defaults.frame_period_ms);
        defaults.duration_frames = j.value("duration_frames", defaults.duration_frames);
        defaults.amplitude = j.value("amplitude", defaults.amplitude);
        for (const auto& g : j.at("videos")) {
            ScenarioGroup group;
            group.base = defaults;
            group.base.kind = scenario_from_string(g.at("kind").get<std::string>());
            group.base.noise_px = g.value("noise_px", defaults.noise_px);
            group.base.dropout_rate = g.value("dropout_rate", defaults.dropout_rate);
            group.base.frame_period_ms = g.value("frame_period_ms", defaults.frame_period_ms);
            group.base.duration_frames = g.value("duration_frames", defaults.duration_frames);
            group.base.amplitude = g.value("amplitude", defaults.amplitude);
            group.count = g.value("count", 1);
            if (group.count < 0) throw Error(Errc::InvalidSpec, "negative video count");
            if (spec.mode == Mode::Walking && group.base.kind == ScenarioKind::StandUpPause) {
                throw Error(Errc::InvalidSpec, "stand_up_pause produces Pause labels, not allowed in walking mode");
            }
            spec.groups.push_back(group);
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidSpec, std::string("synth spec: ") + e.what());
    }
}

Dataset generate_dataset(const SynthDatasetSpec& spec) {
    Dataset ds;
    ds.mode = spec.mode;
    std::uint64_t index = 0;
    for (const auto& g : spec.groups) {
        for (int c = 0; c < g.count; ++c, ++index) {
            ScenarioSpec s = g.base;
            s.seed = derive_seed(spec.seed, index);
            char id[64];
            std::snprintf(id, sizeof id, "v%03llu-%s", static_cast<unsigned long long>(index),
                          std::string(scenario_name(s.kind)).c_str());
            s.video_id = id;
            auto seq = generate_sequence(s);
            seq.mode = spec.mode;
            ds.sequences.push_back(std::move(seq));
        }
    }
    return ds;
}

} // namespace hed

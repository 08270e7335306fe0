#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hed/synth.hpp"
#include "hed/tracking.hpp"

using namespace hed;
using namespace body25;

namespace {

const Skeleton& patient(const PoseFrame& f) {
    for (const auto& s : f.skeletons)
        if (s.person_index == 0) return s;
    FAIL("frame without patient skeleton");
    return f.skeletons.front();
}

/// Label runs as (label, length).
std::vector<std::pair<ClassLabel, int>> runs(const VideoSequence& seq) {
    std::vector<std::pair<ClassLabel, int>> r;
    for (const auto& f : seq.frames) {
        if (r.empty() || r.back().first != f.label) r.emplace_back(f.label, 0);
        ++r.back().second;
    }
    return r;
}

/// |dy| / |d| of the neck to mid-hip segment; 1 for an upright torso.
double verticality(const Skeleton& s) {
    const auto& n = s.keypoints[Neck];
    const auto& h = s.keypoints[MidHip];
    return std::abs(h.y_px - n.y_px) / std::hypot(h.x_px - n.x_px, h.y_px - n.y_px);
}

ScenarioSpec spec_of(ScenarioKind k, std::uint64_t seed) {
    ScenarioSpec s;
    s.kind = k;
    s.seed = seed;
    return s;
}

} // namespace

TEST_CASE("noise-free walk is all Normal and upright") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const VideoSequence seq = generate_sequence(spec_of(ScenarioKind::Walk, seed));
        CHECK(seq.frames.size() == 80);
        CHECK(seq.mode == Mode::Walking);
        CHECK(seq.video_id == "walk-" + std::to_string(seed));
        for (std::size_t i = 0; i < seq.frames.size(); ++i) {
            const auto& f = seq.frames[i];
            CHECK(f.label == ClassLabel::Normal);
            CHECK(f.timestamp_ms == static_cast<std::int64_t>(i) * 100);
            const Skeleton& s = patient(f);
            REQUIRE_FALSE(s.keypoints[Neck].missing());
            REQUIRE_FALSE(s.keypoints[MidHip].missing());
            CHECK(s.keypoints[Neck].y_px < s.keypoints[MidHip].y_px);
        }
    }
}

TEST_CASE("a fall is Normal then Emergency with one transition") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const VideoSequence seq = generate_sequence(spec_of(ScenarioKind::FallDuringWalk, seed));
        const auto r = runs(seq);
        REQUIRE(r.size() == 2);
        CHECK(r[0].first == ClassLabel::Normal);
        CHECK(r[1].first == ClassLabel::Emergency);
        CHECK(r[0].second >= 80 * 35 / 100);
        CHECK(r[0].second <= 80 * 55 / 100 + 1);
    }
}

TEST_CASE("slump and stand-up labels") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const VideoSequence slump = generate_sequence(spec_of(ScenarioKind::SlumpUnconscious, seed));
        CHECK(slump.mode == Mode::Wheelchair);
        const auto a = runs(slump);
        REQUIRE(a.size() == 2);
        CHECK(a[1].first == ClassLabel::Emergency);

        const auto b = runs(generate_sequence(spec_of(ScenarioKind::StandUpPause, seed)));
        REQUIRE(b.size() == 2);
        CHECK(b[0].first == ClassLabel::Normal);
        CHECK(b[1].first == ClassLabel::Pause);

        const auto c = runs(generate_sequence(spec_of(ScenarioKind::SitWheelchair, seed)));
        REQUIRE(c.size() == 1);
        CHECK(c[0].first == ClassLabel::Normal);
    }
}

TEST_CASE("generation is deterministic per seed") {
    ScenarioSpec s = spec_of(ScenarioKind::Bystanders, 42);
    s.noise_px = 3.0;
    s.dropout_rate = 0.1;
    CHECK(generate_sequence(s).frames == generate_sequence(s).frames);
    ScenarioSpec t = s;
    t.seed = 43;
    CHECK_FALSE(generate_sequence(s).frames == generate_sequence(t).frames);
}

TEST_CASE("bystander scenes carry 2 to 5 skeletons and the patient is first") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const VideoSequence seq = generate_sequence(spec_of(ScenarioKind::Bystanders, seed));
        for (const auto& f : seq.frames) {
            CHECK(f.skeletons.size() >= 2);
            CHECK(f.skeletons.size() <= 5);
            CHECK(f.skeletons.front().person_index == 0);
            if (f.marker_px) CHECK(bounding_box(patient(f)).contains(*f.marker_px));
        }
    }
}

TEST_CASE("noise and dropout stay within the image and keep two keypoints") {
    ScenarioSpec s = spec_of(ScenarioKind::FallDuringWalk, 5);
    s.noise_px = 4.0;
    s.dropout_rate = 0.5;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        s.seed = seed;
        for (const auto& f : generate_sequence(s).frames) {
            const Skeleton& p = patient(f);
            CHECK(p.present_count() >= 2);
            for (const auto& k : p.keypoints) {
                if (k.missing()) continue;
                CHECK(k.x_px >= 0.0);
                CHECK(k.y_px >= 0.0);
                CHECK(k.confidence <= 1.0);
            }
        }
    }
}

TEST_CASE("invalid specs are rejected") {
    ScenarioSpec s;
    s.duration_frames = 9;
    CHECK_THROWS_AS(generate_sequence(s), Error);
    s.duration_frames = 80;
    s.dropout_rate = 1.0;
    try {
        (void)generate_sequence(s);
        FAIL("expected InvalidSpec");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidSpec);
    }
    s.dropout_rate = 0.0;
    s.noise_px = -1.0;
    CHECK_THROWS_AS(generate_sequence(s), Error);
}

TEST_CASE("fallen torsos are separable from upright ones") {
    double min_upright = 1.0, max_fallen = 0.0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        ScenarioSpec s = spec_of(ScenarioKind::FallDuringWalk, seed);
        s.noise_px = 2.0;
        const VideoSequence seq = generate_sequence(s);
        for (const auto& f : seq.frames) {
            const double v = verticality(patient(f));
            if (f.label == ClassLabel::Normal) min_upright = std::min(min_upright, v);
        }
        // the final frames are fully on the floor
        for (std::size_t i = seq.frames.size() - 5; i < seq.frames.size(); ++i)
            max_fallen = std::max(max_fallen, verticality(patient(seq.frames[i])));
    }
    CHECK(min_upright > 0.9);
    CHECK(max_fallen < 0.5);
}

TEST_CASE("dataset spec from json") {
    const auto j = nlohmann::json::parse(R"({
        "mode": "wheelchair", "seed": 9, "noise_px": 1.5, "duration_frames": 40,
        "videos": [{"kind": "sit_wheelchair", "count": 2},
                   {"kind": "slump_unconscious", "count": 3, "amplitude": 0.5, "noise_px": 0}]
    })");
    const SynthDatasetSpec spec = synth_spec_from_json(j);
    CHECK(spec.mode == Mode::Wheelchair);
    REQUIRE(spec.groups.size() == 2);
    CHECK(spec.groups[0].base.noise_px == 1.5);
    CHECK(spec.groups[1].base.noise_px == 0.0);
    CHECK(spec.groups[1].base.amplitude == 0.5);
    CHECK(spec.groups[1].base.duration_frames == 40);

    const Dataset ds = generate_dataset(spec);
    REQUIRE(ds.sequences.size() == 5);
    CHECK(ds.sequences[0].video_id == "v000-sit_wheelchair");
    CHECK(ds.sequences[4].video_id == "v004-slump_unconscious");
    CHECK(ds.sequences[4].frames.size() == 40);
    CHECK(ds.frame_count() == 200);

    auto walking = j;
    walking["mode"] = "walking";
    walking["videos"][0]["kind"] = "stand_up_pause";
    CHECK_THROWS_AS(synth_spec_from_json(walking), Error);
    CHECK_THROWS_AS(synth_spec_from_json(nlohmann::json{{"mode", "walking"}}), Error);
    CHECK_THROWS_AS(scenario_from_string("cartwheel"), Error);
}

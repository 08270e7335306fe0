#include "hed/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hed {

using nlohmann::json;

ClassLabel label_from_int(std::int64_t id) {
    if (id < 0 || id >= kNumClasses) {
        throw Error(Errc::UnknownLabel, "label id " + std::to_string(id) + " not in {0,1,2}");
    }
    return static_cast<ClassLabel>(id);
}

std::string_view label_name(ClassLabel l) noexcept {
    switch (l) {
    case ClassLabel::Normal: return "Normal";
    case ClassLabel::Emergency: return "Emergency";
    case ClassLabel::Pause: return "Pause";
    }
    return "?";
}

std::string_view mode_name(Mode m) noexcept {
    switch (m) {
    case Mode::Walking: return "walking";
    case Mode::Wheelchair: return "wheelchair";
    case Mode::Combined: return "combined";
    }
    return "?";
}

Mode mode_from_string(std::string_view s) {
    if (s == "walking") return Mode::Walking;
    if (s == "wheelchair") return Mode::Wheelchair;
    if (s == "combined") return Mode::Combined;
    throw Error(Errc::InvalidArgument, "unknown mode '" + std::string(s) + "'");
}

int Skeleton::present_count() const noexcept {
    return static_cast<int>(std::count_if(keypoints.begin(), keypoints.end(),
                                          [](const Keypoint& k) { return !k.missing(); }));
}

std::size_t Dataset::frame_count() const noexcept {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.frames.size();
    return n;
}

namespace {

[[noreturn]] void malformed(const std::string& what) { throw Error(Errc::MalformedRecord, what); }

double number(const json& j, const char* what) {
    if (!j.is_number()) malformed(std::string(what) + " is not a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) malformed(std::string(what) + " is not finite");
    return v;
}

Keypoint make_keypoint(double x, double y, double conf, std::optional<double> depth) {
    if (conf < 0.0 || conf > 1.0) malformed("keypoint confidence outside [0,1]");
    Keypoint k;
    k.confidence = conf;
    if (conf == 0.0) return k;
    k.x_px = x;
    k.y_px = y;
    // non-positive depth is a stereo hole
    if (depth && *depth > 0.0) k.depth_m = depth;
    return k;
}

Keypoint keypoint_from_tuple(const json& t) {
    if (!t.is_array() || (t.size() != 3 && t.size() != 4)) malformed("keypoint must be [x,y,conf(,depth)]");
    std::optional<double> depth;
    if (t.size() == 4 && !t[3].is_null()) depth = number(t[3], "depth");
    return make_keypoint(number(t[0], "x"), number(t[1], "y"), number(t[2], "confidence"), depth);
}

const json& field(const json& obj, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) malformed("missing field '" + key + "'");
    return *it;
}

} // namespace

PoseFrame parse_frame_record(std::string_view line, const FieldMapping& mapping) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::parse_error& e) {
        malformed(std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) malformed("record is not an object");

    PoseFrame frame;
    const json& t = field(rec, mapping.time_key);
    if (!t.is_number_integer()) malformed("timestamp is not an integer");
    frame.timestamp_ms = t.get<std::int64_t>();

    const json& label = field(rec, mapping.label_key);
    if (!label.is_number_integer()) malformed("label is not an integer");
    std::int64_t label_id = label.get<std::int64_t>();
    if (!mapping.label_map.empty()) {
        auto it = mapping.label_map.find(label_id);
        if (it == mapping.label_map.end()) {
            throw Error(Errc::UnknownLabel, "source label " + std::to_string(label_id) + " has no mapping");
        }
        label_id = it->second;
    }
    frame.label = label_from_int(label_id);

    if (auto it = rec.find(mapping.marker_key); it != rec.end() && !it->is_null()) {
        if (!it->is_array() || it->size() != 2) malformed("marker must be [x,y] or null");
        frame.marker_px = PixelPoint{number((*it)[0], "marker x"), number((*it)[1], "marker y")};
    }

    const json& skels = field(rec, mapping.skeletons_key);
    if (!skels.is_array()) malformed("skeletons is not an array");
    for (const json& s : skels) {
        if (!s.is_object()) malformed("skeleton is not an object");
        Skeleton sk;
        if (auto it = s.find(mapping.id_key); it != s.end()) {
            if (!it->is_number_integer()) malformed("skeleton id is not an integer");
            sk.person_index = it->get<int>();
        }
        const json& kp = field(s, mapping.keypoints_key);
        if (!kp.is_array()) malformed("keypoints is not an array");
        if (mapping.flat_keypoints) {
            const auto stride = static_cast<std::size_t>(mapping.flat_stride);
            if (stride != 3 && stride != 4) malformed("flat stride must be 3 or 4");
            if (kp.size() != stride * kNumKeypoints) {
                malformed("expected " + std::to_string(stride * kNumKeypoints) + " flat keypoint values");
            }
            for (std::size_t i = 0; i < kNumKeypoints; ++i) {
                const json* v = &kp[i * stride];
                std::optional<double> depth;
                if (stride == 4 && !v[3].is_null()) depth = number(v[3], "depth");
                sk.keypoints[i] = make_keypoint(number(v[0], "x"), number(v[1], "y"),
                                                number(v[2], "confidence"), depth);
            }
        } else {
            if (kp.size() != kNumKeypoints) {
                malformed("expected 25 keypoints, got " + std::to_string(kp.size()));
            }
            for (std::size_t i = 0; i < kNumKeypoints; ++i) sk.keypoints[i] = keypoint_from_tuple(kp[i]);
        }
        if (sk.present_count() == 0) malformed("skeleton without any detected keypoint");
        frame.skeletons.push_back(sk);
    }
    return frame;
}

std::string serialize_frame_record(const PoseFrame& frame) {
    json rec = json::object();
    rec["t"] = frame.timestamp_ms;
    rec["label"] = to_int(frame.label);
    rec["marker"] = frame.marker_px ? json::array({frame.marker_px->x, frame.marker_px->y}) : json(nullptr);
    json skels = json::array();
    for (const auto& s : frame.skeletons) {
        json kp = json::array();
        for (const auto& k : s.keypoints) {
            kp.push_back(json::array({k.x_px, k.y_px, k.confidence, k.depth_m ? json(*k.depth_m) : json(nullptr)}));
        }
        skels.push_back(json{{"id", s.person_index}, {"kp", std::move(kp)}});
    }
    rec["skeletons"] = std::move(skels);
    return rec.dump();
}

FieldMapping FieldMapping::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open field mapping " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("field mapping: ") + e.what());
    }
    FieldMapping m;
    m.time_key = j.value("time_key", m.time_key);
    m.label_key = j.value("label_key", m.label_key);
    m.marker_key = j.value("marker_key", m.marker_key);
    m.skeletons_key = j.value("skeletons_key", m.skeletons_key);
    m.id_key = j.value("id_key", m.id_key);
    m.keypoints_key = j.value("keypoints_key", m.keypoints_key);
    m.flat_keypoints = j.value("flat_keypoints", m.flat_keypoints);
    m.flat_stride = j.value("flat_stride", m.flat_stride);
    if (auto it = j.find("label_map"); it != j.end()) {
        for (auto& [k, v] : it->items()) m.label_map[std::stoll(k)] = v.get<std::int64_t>();
    }
    return m;
}

VideoSequence load_video_file(const std::filesystem::path& file, std::string video_id, Mode mode,
                              int frame_period_ms, const FieldMapping& mapping) {
    if (frame_period_ms <= 0) throw Error(Errc::InvalidArgument, "frame_period_ms must be > 0");
    std::ifstream in(file);
    if (!in) throw Error(Errc::Io, "cannot open " + file.string());
    VideoSequence seq;
    seq.video_id = std::move(video_id);
    seq.mode = mode;
    seq.frame_period_ms = frame_period_ms;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        PoseFrame f;
        try {
            f = parse_frame_record(line, mapping);
        } catch (const Error& e) {
            throw Error(e.code(), file.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!seq.frames.empty() && f.timestamp_ms <= seq.frames.back().timestamp_ms) {
            malformed(file.filename().string() + ":" + std::to_string(lineno) + ": timestamps not increasing");
        }
        if (mode == Mode::Walking && f.label == ClassLabel::Pause) {
            throw Error(Errc::UnknownLabel, file.filename().string() + ":" + std::to_string(lineno) +
                                                ": Pause label in a walking dataset");
        }
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

Dataset load_dataset(const std::filesystem::path& dir, Mode mode, const FieldMapping& mapping) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw Error(Errc::MissingManifest, "no manifest.json in " + dir.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("manifest: ") + e.what());
    }
    const Mode file_mode = mode_from_string(manifest.at("mode").get<std::string>());
    if (file_mode != mode && mode != Mode::Combined) {
        throw Error(Errc::InvalidArgument, "dataset mode is " + std::string(mode_name(file_mode)) +
                                               ", requested " + std::string(mode_name(mode)));
    }

    Dataset ds;
    ds.mode = mode;
    std::size_t expected = 0;
    for (const json& v : manifest.at("videos")) {
        const auto id = v.at("id").get<std::string>();
        const auto frames = v.at("frames").get<std::size_t>();
        const int period = v.value("frame_period_ms", 100);
        auto seq = load_video_file(dir / (id + ".jsonl"), id, file_mode, period, mapping);
        seq.mode = mode;
        seq.camera = v.value("camera", std::string{});
        seq.location = v.value("location", std::string{});
        if (auto it = v.find("split"); it != v.end() && it->is_string()) seq.split_tag = it->get<std::string>();
        if (seq.frames.size() != frames) {
            throw Error(Errc::InconsistentCount, "video " + id + ": manifest says " + std::to_string(frames) +
                                                     ", file holds " + std::to_string(seq.frames.size()));
        }
        expected += frames;
        ds.sequences.push_back(std::move(seq));
    }
    std::vector<std::string> ids;
    for (const auto& s : ds.sequences) ids.push_back(s.video_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error(Errc::MalformedRecord, "duplicate video id in manifest");
    }
    if (auto it = manifest.find("total_frames"); it != manifest.end() && it->get<std::size_t>() != expected) {
        throw Error(Errc::InconsistentCount, "manifest total_frames disagrees with per-video counts");
    }
    return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json videos = json::array();
    for (const auto& seq : dataset.sequences) {
        std::ofstream out(dir / (seq.video_id + ".jsonl"), std::ios::binary);
        if (!out) throw Error(Errc::Io, "cannot write video " + seq.video_id);
        for (const auto& f : seq.frames) out << serialize_frame_record(f) << '\n';
        json v{{"id", seq.video_id}, {"frames", seq.frames.size()}, {"frame_period_ms", seq.frame_period_ms}};
        if (!seq.camera.empty()) v["camera"] = seq.camera;
        if (!seq.location.empty()) v["location"] = seq.location;
        if (seq.split_tag) v["split"] = *seq.split_tag;
        videos.push_back(std::move(v));
    }
    json manifest{{"mode", std::string(mode_name(dataset.mode))},
                  {"total_frames", dataset.frame_count()},
                  {"videos", std::move(videos)}};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write manifest in " + dir.string());
    out << manifest.dump(2) << '\n';
}

std::array<std::size_t, kNumClasses> class_distribution(const Dataset& dataset) {
    std::array<std::size_t, kNumClasses> counts{};
    for (const auto& s : dataset.sequences)
        for (const auto& f : s.frames) ++counts[static_cast<std::size_t>(to_int(f.label))];
    return counts;
}

namespace {

Dataset subset(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.mode = ds.mode;
    out.sequences.reserve(idx.size());
    for (auto i : idx) out.sequences.push_back(ds.sequences[i]);
    return out;
}

} // namespace

Split split_videos(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw Error(Errc::InvalidArgument, "test_fraction must be in (0,1)");
    }
    const std::size_t n = dataset.sequences.size();
    if (n < 2) throw Error(Errc::TooFewVideos, "need at least 2 videos to split");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    const double target = test_fraction * static_cast<double>(dataset.frame_count());
    std::vector<bool> is_test(n, false);
    double acc = 0.0;
    std::size_t n_test = 0;
    for (auto i : order) {
        const auto len = static_cast<double>(dataset.sequences[i].frames.size());
        if (n_test + 1 < n && std::abs(acc + len - target) < std::abs(acc - target)) {
            is_test[i] = true;
            acc += len;
            ++n_test;
        }
    }
    if (n_test == 0) is_test[order.front()] = true;

    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < n; ++i) (is_test[i] ? test_idx : train_idx).push_back(i);
    return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

Split split_by_tag(const Dataset& dataset) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < dataset.sequences.size(); ++i) {
        const auto& tag = dataset.sequences[i].split_tag;
        if (!tag) throw Error(Errc::InvalidArgument, "video " + dataset.sequences[i].video_id + " has no split tag");
        if (*tag == "test") {
            test_idx.push_back(i);
        } else if (*tag == "train") {
            train_idx.push_back(i);
        } else {
            throw Error(Errc::InvalidArgument, "unknown split tag '" + *tag + "'");
        }
    }
    return {subset(dataset, train_idx), subset(dataset, test_idx)};
}

std::vector<Fold> kfold_videos(const Dataset& dataset, int k, std::uint64_t seed) {
    if (k < 2) throw Error(Errc::InvalidArgument, "k must be >= 2");
    const std::size_t n = dataset.sequences.size();
    if (n < static_cast<std::size_t>(k)) {
        throw Error(Errc::TooFewVideos, std::to_string(n) + " videos for " + std::to_string(k) + " folds");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::size_t> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % static_cast<std::size_t>(k);

    std::vector<Fold> folds;
    folds.reserve(static_cast<std::size_t>(k));
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        std::vector<std::size_t> tr, va;
        for (std::size_t i = 0; i < n; ++i) (fold_of[i] == f ? va : tr).push_back(i);
        folds.push_back({subset(dataset, tr), subset(dataset, va)});
    }
    return folds;
}

std::string dataset_hash(const Dataset& dataset) {
    Fnv1a h;
    h.update(mode_name(dataset.mode));
    for (const auto& s : dataset.sequences) {
        h.update(s.video_id);
        h.update_u64(static_cast<std::uint64_t>(s.frame_period_ms));
        for (const auto& f : s.frames) h.update(serialize_frame_record(f));
    }
    return h.hex();
}

} // namespace hed

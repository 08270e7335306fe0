#include "hed/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "hed/features.hpp"
#include "hed/synth.hpp"

namespace hed {

using nlohmann::json;

void write_json_file(const json& j, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + file.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, file.string() + ": " + e.what());
    }
}

std::string file_hash(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error(Errc::Io, "cannot read " + file.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Fnv1a h;
    h.update(bytes);
    return h.hex();
}

std::string_view calibration_source_name(CalibrationSource s) noexcept {
    return s == CalibrationSource::OutOfFold ? "out_of_fold" : "in_sample";
}

CalibrationSource calibration_source_from_string(std::string_view s) {
    if (s == "out_of_fold") return CalibrationSource::OutOfFold;
    if (s == "in_sample") return CalibrationSource::InSample;
    throw Error(Errc::InvalidArgument, "unknown calibration source '" + std::string(s) + "'");
}

json RunConfig::to_json() const {
    json j{{"dataset", dataset.generic_string()},
           {"test_dataset", test_dataset ? json(test_dataset->generic_string()) : json(nullptr)},
           {"mode", mode_name(mode)},
           {"family", family_name(family)},
           {"grid", grid ? *grid : json(nullptr)},
           {"seed", seed},
           {"k_folds", k_folds},
           {"calibration_source", calibration_source_name(calibration_source)},
           {"test_fraction", test_fraction},
           {"gate_radius_px", tracker.gate_radius_px},
           {"lock_timeout_ms", tracker.lock_timeout_ms},
           {"field_mapping", mapping_file ? json(mapping_file->generic_string()) : json(nullptr)}};
    return j;
}

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
    const auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };
    try {
        RunConfig c;
        if (j.contains("dataset")) c.dataset = resolve(j["dataset"].get<std::string>());
        if (j.contains("test_dataset") && !j["test_dataset"].is_null())
            c.test_dataset = resolve(j["test_dataset"].get<std::string>());
        if (j.contains("mode")) c.mode = mode_from_string(j["mode"].get<std::string>());
        if (j.contains("family")) c.family = family_from_string(j["family"].get<std::string>());
        if (j.contains("grid") && !j["grid"].is_null()) {
            c.grid = j["grid"].is_string() ? read_json_file(resolve(j["grid"].get<std::string>())) : j["grid"];
        }
        c.seed = j.value("seed", c.seed);
        c.k_folds = j.value("k_folds", c.k_folds);
        if (j.contains("calibration_source"))
            c.calibration_source = calibration_source_from_string(j["calibration_source"].get<std::string>());
        c.test_fraction = j.value("test_fraction", c.test_fraction);
        c.tracker.gate_radius_px = j.value("gate_radius_px", c.tracker.gate_radius_px);
        c.tracker.lock_timeout_ms = j.value("lock_timeout_ms", c.tracker.lock_timeout_ms);
        if (j.contains("field_mapping") && !j["field_mapping"].is_null())
            c.mapping_file = resolve(j["field_mapping"].get<std::string>());
        if (j.contains("out")) c.out_dir = resolve(j["out"].get<std::string>());
        if (c.k_folds < 2) throw Error(Errc::InvalidArgument, "k_folds must be >= 2");
        if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
            throw Error(Errc::InvalidArgument, "test_fraction must be in (0,1)");
        return c;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidArgument, std::string("run config: ") + e.what());
    }
}

RunData load_run_data(const RunConfig& config) {
    const auto require = [](const fs::path& p) {
        if (p.empty() || !fs::exists(p)) throw Error(Errc::InvalidArgument, "dataset path '" + p.string() + "' does not exist");
    };
    require(config.dataset);
    const FieldMapping mapping = config.mapping_file ? FieldMapping::from_json_file(*config.mapping_file) : FieldMapping{};
    RunData data;
    if (config.test_dataset) {
        require(*config.test_dataset);
        data.split.train = load_dataset(config.dataset, config.mode, mapping);
        data.split.test = load_dataset(*config.test_dataset, config.mode, mapping);
    } else {
        const Dataset all = load_dataset(config.dataset, config.mode, mapping);
        const bool tagged = !all.sequences.empty() &&
                            std::all_of(all.sequences.begin(), all.sequences.end(), [](const auto& v) { return v.split_tag.has_value(); });
        data.split = tagged ? split_by_tag(all) : split_videos(all, config.test_fraction, config.seed);
    }
    data.train_hash = dataset_hash(data.split.train);
    data.test_hash = dataset_hash(data.split.test);
    return data;
}

namespace {

json provenance(const RunConfig& config, const RunData& data) {
    return json{{"config", config.to_json()}, {"seed", config.seed}, {"split_hash", data.train_hash},
                {"test_hash", data.test_hash}};
}

TrainedModel load_model(const fs::path& file) { return TrainedModel::from_json(read_json_file(file)); }

std::optional<std::string> recorded_split_hash(const json& artifact) {
    if (artifact.contains("provenance") && artifact["provenance"].contains("split_hash"))
        return artifact["provenance"]["split_hash"].get<std::string>();
    return std::nullopt;
}

void require_trained_on(const json& artifact, const RunData& data, const fs::path& file) {
    if (auto h = recorded_split_hash(artifact); h && *h != data.train_hash) {
        throw Error(Errc::InvalidArgument, file.string() + " was fitted on a different train split");
    }
}

void refuse_leak(const json& artifact, const RunData& data, const fs::path& file) {
    if (auto h = recorded_split_hash(artifact); h && *h == data.test_hash) {
        throw Error(Errc::SplitLeak, file.string() + " was fitted on the test split");
    }
}

int uniform_frame_period(const Dataset& ds) {
    if (ds.sequences.empty()) throw Error(Errc::InvalidArgument, "empty dataset");
    const int period = ds.sequences.front().frame_period_ms;
    for (const auto& v : ds.sequences)
        if (v.frame_period_ms != period) throw Error(Errc::InvalidArgument, "videos differ in frame period");
    return period;
}

struct DelayFile {
    int delay_ms = 0;
    int frame_period_ms = 100;
};

DelayFile read_delay(const json& j) {
    try {
        if (j.at("format") != "hed-delay" || j.at("version") != 1) throw Error(Errc::MalformedRecord, "not a version-1 delay file");
        return {j.at("delay_ms").get<int>(), j.at("frame_period_ms").get<int>()};
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("delay file: ") + e.what());
    }
}

std::ofstream open_out(const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw Error(Errc::Io, "cannot write " + file.string());
    return out;
}

struct ScoredVideo {
    VideoSamples samples;
    Eigen::MatrixXd scores;
};

/// Decision scores for every train video, in train-split order.
std::vector<ScoredVideo> train_split_scores(const RunConfig& config, const RunData& data, const TrainedModel& model) {
    std::vector<ScoredVideo> out;
    for (auto& v : extract_dataset_samples(data.split.train, config.tracker)) out.push_back({std::move(v), {}});
    if (config.calibration_source == CalibrationSource::InSample) {
        for (auto& v : out) v.scores = model.decision_scores_rows(v.samples.features);
        return out;
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < out.size(); ++i) index[out[i].samples.video_id] = i;
    for (const Fold& fold : kfold_videos(data.split.train, config.k_folds, config.seed)) {
        const SampleSet fit = stack_samples(extract_dataset_samples(fold.train, config.tracker));
        const TrainedModel m = train(model.spec(), fit.features, fit.labels, config.seed, model.n_classes());
        for (const auto& v : fold.validation.sequences) {
            ScoredVideo& sv = out[index.at(v.video_id)];
            sv.scores = m.decision_scores_rows(sv.samples.features);
        }
    }
    return out;
}

LabeledStream labeled_from_scores(const ScoredVideo& v, const Calibration& cal) {
    LabeledStream s;
    s.video_id = v.samples.video_id;
    s.truth = v.samples.labels;
    s.timestamps_ms = v.samples.timestamps_ms;
    const Eigen::MatrixXd probs = softmax_rows(v.scores);
    for (Eigen::Index r = 0; r < probs.rows(); ++r) s.predicted.push_back(classify_with_threshold(probs.row(r).transpose(), cal));
    return s;
}

} // namespace

TrainOutcome cmd_train(const RunConfig& config) {
    const RunData data = load_run_data(config);
    const auto grid = config.grid ? grid_from_json(*config.grid) : default_grid(config.family);
    const int n_classes = num_classes(config.mode);
    auto cv = grid_search_cv(grid, data.split.train, config.k_folds, config.seed, n_classes, config.tracker);
    const SampleSet train_set = stack_samples(extract_dataset_samples(data.split.train, config.tracker));
    TrainedModel model = train(cv.best, train_set.features, train_set.labels, config.seed, n_classes);

    json model_json = model.to_json();
    model_json["provenance"] = provenance(config, data);
    write_json_file(model_json, config.out_dir / "model.json");

    json rows = json::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        rows.push_back({{"spec", spec_to_json(grid[i])}, {"mean_recall", cv.mean_recall[i]}, {"fold_recall", cv.fold_recall[i]}});
    }
    write_json_file(json{{"grid", rows},
                         {"best_index", cv.best_index},
                         {"best", spec_to_json(cv.best)},
                         {"k_folds", config.k_folds},
                         {"provenance", provenance(config, data)}},
                    config.out_dir / "cv_summary.json");
    return {std::move(model), std::move(cv)};
}

Calibration cmd_calibrate(const RunConfig& config, const fs::path& model_file) {
    const RunData data = load_run_data(config);
    const json model_json = read_json_file(model_file);
    require_trained_on(model_json, data, model_file);
    const TrainedModel model = TrainedModel::from_json(model_json);
    const auto scored = train_split_scores(config, data, model);
    Eigen::Index rows = 0;
    for (const auto& v : scored) rows += v.scores.rows();
    Eigen::MatrixXd scores(rows, model.n_classes());
    std::vector<ClassLabel> labels;
    rows = 0;
    for (const auto& v : scored) {
        scores.middleRows(rows, v.scores.rows()) = v.scores;
        rows += v.scores.rows();
        labels.insert(labels.end(), v.samples.labels.begin(), v.samples.labels.end());
    }

    Calibration cal;
    if (config.mode == Mode::Walking) {
        const Eigen::MatrixXd probs = softmax_rows(scores);
        const int e = to_int(ClassLabel::Emergency);
        std::vector<double> p(static_cast<std::size_t>(probs.rows()));
        std::vector<int> y(labels.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = probs(static_cast<Eigen::Index>(i), e);
            y[i] = labels[i] == ClassLabel::Emergency ? 1 : 0;
        }
        cal = youden_threshold(p, y);
    } else {
        cal = emergency_threshold(scores, labels);
    }

    json j = calibration_to_json(cal);
    j["provenance"] = provenance(config, data);
    j["provenance"]["model_hash"] = file_hash(model_file);
    write_json_file(j, config.out_dir / "calibration.json");
    write_threshold_curve_csv(cal, config.out_dir / "threshold_curve.csv");
    if (cal.mode == CalibrationMode::Binary) write_roc_csv(cal, config.out_dir / "roc.csv");
    return cal;
}

DelayOptimization cmd_tune_delay(const RunConfig& config, const fs::path& model_file, const fs::path& calibration_file) {
    const RunData data = load_run_data(config);
    const json model_json = read_json_file(model_file);
    const json cal_json = read_json_file(calibration_file);
    require_trained_on(model_json, data, model_file);
    require_trained_on(cal_json, data, calibration_file);
    const TrainedModel model = TrainedModel::from_json(model_json);
    const Calibration cal = calibration_from_json(cal_json);
    const int period = uniform_frame_period(data.split.train);

    std::vector<LabeledStream> streams;
    for (const auto& v : train_split_scores(config, data, model)) streams.push_back(labeled_from_scores(v, cal));
    DelayOptimization opt = optimize_delay(streams, period);

    json j{{"format", "hed-delay"}, {"version", 1}, {"delay_ms", opt.best_delay_ms}, {"frame_period_ms", period}};
    j["provenance"] = provenance(config, data);
    j["provenance"]["model_hash"] = file_hash(model_file);
    j["provenance"]["calibration_hash"] = file_hash(calibration_file);
    write_json_file(j, config.out_dir / "delay.json");
    write_delay_curve_csv(opt, config.out_dir / "delay_curve.csv");
    return opt;
}

EvaluationReport cmd_evaluate(const RunConfig& config, const fs::path& model_file, const fs::path& calibration_file,
                              const fs::path& delay_file) {
    const RunData data = load_run_data(config);
    const json model_json = read_json_file(model_file);
    const json cal_json = read_json_file(calibration_file);
    const json delay_json = read_json_file(delay_file);
    refuse_leak(model_json, data, model_file);
    refuse_leak(cal_json, data, calibration_file);
    refuse_leak(delay_json, data, delay_file);
    const TrainedModel model = TrainedModel::from_json(model_json);
    const Calibration cal = calibration_from_json(cal_json);
    const DelayFile delay = read_delay(delay_json);

    EvaluationTrace trace;
    const auto test = extract_dataset_samples(data.split.test, config.tracker);
    EvaluationReport report = evaluate(model, cal, delay.delay_ms, test, config.mode, &trace);

    json j = report_to_json(report);
    j["provenance"] = provenance(config, data);
    j["provenance"]["model_hash"] = file_hash(model_file);
    j["provenance"]["calibration_hash"] = file_hash(calibration_file);
    j["provenance"]["delay_hash"] = file_hash(delay_file);
    write_json_file(j, config.out_dir / "report.json");
    open_out(config.out_dir / "report.txt") << report_table({report});

    auto preds = open_out(config.out_dir / "predictions.jsonl");
    for (std::size_t v = 0; v < trace.raw.size(); ++v) {
        const auto& s = trace.raw[v];
        for (std::size_t k = 0; k < s.truth.size(); ++k) {
            preds << json{{"video", s.video_id},
                          {"t", s.timestamps_ms[k]},
                          {"truth", to_int(s.truth[k])},
                          {"raw", to_int(s.predicted[k])},
                          {"committed", to_int(trace.committed[v][k])}}
                         .dump()
                  << '\n';
        }
    }
    auto events = open_out(config.out_dir / "events.jsonl");
    for (const auto& e : trace.events) events << event_to_jsonl(e) << '\n';
    return report;
}

double ReplayResult::frames_per_second() const noexcept {
    return wall_seconds > 0.0 ? static_cast<double>(timestamps_ms.size()) / wall_seconds : 0.0;
}

double ReplayResult::max_latency_ms() const noexcept {
    return frame_latency_ms.empty() ? 0.0 : *std::max_element(frame_latency_ms.begin(), frame_latency_ms.end());
}

double ReplayResult::mean_latency_ms() const noexcept {
    if (frame_latency_ms.empty()) return 0.0;
    return std::accumulate(frame_latency_ms.begin(), frame_latency_ms.end(), 0.0) / static_cast<double>(frame_latency_ms.size());
}

ReplayResult cmd_replay(const ReplayOptions& options) {
    using clock = std::chrono::steady_clock;
    const TrainedModel model = load_model(options.model_file);
    const Calibration cal = calibration_from_json(read_json_file(options.calibration_file));
    DelayFile delay;
    if (options.delay_file) delay = read_delay(read_json_file(*options.delay_file));

    std::ifstream in(options.stream_file, std::ios::binary);
    if (!in) throw Error(Errc::InvalidArgument, "stream file '" + options.stream_file.string() + "' does not exist");

    ReplayResult result;
    DelayFilter filter(delay.delay_ms, delay.frame_period_ms);
    TrackState state;
    state.lock_timeout_ms = options.tracker.lock_timeout_ms;
    std::vector<ClassLabel> raw_seq, committed_seq;
    std::vector<std::int64_t> ts_seq;

    const auto start = clock::now();
    std::optional<std::int64_t> t0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        PoseFrame frame;
        try {
            frame = parse_frame_record(line);
        } catch (const Error& e) {
            throw Error(e.code(), options.stream_file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (options.paced) {
            if (!t0) t0 = frame.timestamp_ms;
            std::this_thread::sleep_until(start + std::chrono::milliseconds(frame.timestamp_ms - *t0));
        }
        const auto begin = clock::now();
        auto [patient, next] = select_patient(frame, state, options.tracker);
        state = next;
        std::optional<ClassLabel> raw;
        if (patient && patient->skeleton.present_count() >= 2) {
            const FeatureVector x = extract_features<double>(*patient);
            const Eigen::VectorXd probs = softmax(model.decision_scores(x));
            raw = classify_with_threshold(probs, cal);
            filter.step(*raw);
            raw_seq.push_back(*raw);
            committed_seq.push_back(filter.committed());
            ts_seq.push_back(frame.timestamp_ms);
        }
        result.frame_latency_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - begin).count());
        result.timestamps_ms.push_back(frame.timestamp_ms);
        result.raw.push_back(raw);
        result.committed.push_back(filter.committed());
    }
    result.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
    result.events = detect_events(raw_seq, committed_seq, ts_seq, options.stream_file.stem().string());

    auto labels = open_out(options.out_dir / "replay_labels.jsonl");
    for (std::size_t i = 0; i < result.timestamps_ms.size(); ++i) {
        labels << json{{"t", result.timestamps_ms[i]},
                       {"raw", result.raw[i] ? json(to_int(*result.raw[i])) : json(nullptr)},
                       {"committed", to_int(result.committed[i])}}
                      .dump()
               << '\n';
    }
    auto events = open_out(options.out_dir / "events.jsonl");
    for (const auto& e : result.events) events << event_to_jsonl(e) << '\n';
    return result;
}

Dataset cmd_synth(const fs::path& spec_file, const fs::path& out_dir, std::optional<std::uint64_t> seed) {
    if (!fs::exists(spec_file)) throw Error(Errc::InvalidArgument, "synth spec '" + spec_file.string() + "' does not exist");
    SynthDatasetSpec spec = synth_spec_from_json(read_json_file(spec_file));
    if (seed) spec.seed = *seed;
    Dataset ds = generate_dataset(spec);
    save_dataset(ds, out_dir);
    return ds;
}

} // namespace hed

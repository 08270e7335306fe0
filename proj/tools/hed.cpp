// Command-line front end: synth, train, calibrate, tune-delay, evaluate, replay.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hed/harness.hpp"

namespace {

using namespace hed;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> config;
};

struct RunOverrides {
    std::optional<std::string> dataset;
    std::optional<std::string> test_dataset;
    std::optional<std::string> mode;
    std::optional<std::string> family;
    std::optional<std::string> grid;
    std::optional<int> k_folds;
    std::optional<std::string> calibration_source;
};

RunConfig make_config(const Globals& g, const RunOverrides& o) {
    RunConfig c;
    if (g.config) {
        const fs::path file(*g.config);
        if (!fs::exists(file)) throw Error(Errc::InvalidArgument, "config file '" + file.string() + "' does not exist");
        c = RunConfig::from_json(read_json_file(file), file.parent_path());
    }
    if (o.dataset) c.dataset = *o.dataset;
    if (o.test_dataset) c.test_dataset = fs::path(*o.test_dataset);
    if (o.mode) c.mode = mode_from_string(*o.mode);
    if (o.family) c.family = family_from_string(*o.family);
    if (o.grid) c.grid = read_json_file(*o.grid);
    if (o.k_folds) c.k_folds = *o.k_folds;
    if (o.calibration_source) c.calibration_source = calibration_source_from_string(*o.calibration_source);
    if (g.seed) c.seed = *g.seed;
    if (g.out) c.out_dir = *g.out;
    if (c.dataset.empty()) throw Error(Errc::InvalidArgument, "no dataset given (--dataset or config \"dataset\")");
    return c;
}

fs::path or_default(const std::optional<std::string>& p, const fs::path& dir, const char* name) {
    return p ? fs::path(*p) : dir / name;
}

void add_run_options(CLI::App* cmd, RunOverrides& o) {
    cmd->add_option("--dataset", o.dataset, "Dataset directory (manifest.json plus one JSONL file per video)");
    cmd->add_option("--test-dataset", o.test_dataset, "Separate test dataset directory");
    cmd->add_option("--mode", o.mode, "walking, wheelchair or combined");
    cmd->add_option("--family", o.family, "svm, rf or mlp");
    cmd->add_option("--grid", o.grid, "Hyperparameter grid JSON file");
    cmd->add_option("--k-folds", o.k_folds, "Cross-validation folds");
    cmd->add_option("--calibration-source", o.calibration_source,
                    "Train-split scores for calibrate and tune-delay: out_of_fold (default) or in_sample");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recall-optimized emergency detection over body keypoint streams"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Seed recorded in every artifact");
    app.add_option("--out", g.out, "Output directory");
    app.add_option("--config", g.config, "Run config JSON (synth: dataset spec JSON)");

    RunOverrides o;
    std::optional<std::string> model, calibration, delay, stream;
    bool paced = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from a spec");
    std::optional<std::string> spec;
    synth->add_option("--spec", spec, "Dataset spec JSON (defaults to --config)");

    auto* train = app.add_subcommand("train", "Grid search with video-level cross-validation, then fit the best spec");
    add_run_options(train, o);

    auto* calibrate = app.add_subcommand("calibrate", "Fit the decision threshold on the train split");
    add_run_options(calibrate, o);
    calibrate->add_option("--model", model, "Model file (default <out>/model.json)");

    auto* tune = app.add_subcommand("tune-delay", "Pick the delay with the best Emergency F1 on the train split");
    add_run_options(tune, o);
    tune->add_option("--model", model, "Model file (default <out>/model.json)");
    tune->add_option("--calibration", calibration, "Calibration file (default <out>/calibration.json)");

    auto* eval = app.add_subcommand("evaluate", "Evaluate the full chain on the test split");
    add_run_options(eval, o);
    eval->add_option("--model", model, "Model file (default <out>/model.json)");
    eval->add_option("--calibration", calibration, "Calibration file (default <out>/calibration.json)");
    eval->add_option("--delay", delay, "Delay file (default <out>/delay.json)");

    auto* replay = app.add_subcommand("replay", "Run one JSONL stream frame by frame");
    replay->add_option("--stream", stream, "Stream file in the canonical JSONL frame format")->required();
    replay->add_option("--model", model, "Model file (default <out>/model.json)");
    replay->add_option("--calibration", calibration, "Calibration file (default <out>/calibration.json)");
    replay->add_option("--delay", delay, "Delay file (default: no delay)");
    replay->add_flag("--paced", paced, "Deliver frames at their recorded timestamps");

    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path out = g.out ? fs::path(*g.out) : fs::path("out");
        if (synth->parsed()) {
            const auto spec_file = spec ? spec : g.config;
            if (!spec_file) throw Error(Errc::InvalidArgument, "synth needs --spec or --config");
            const Dataset ds = cmd_synth(*spec_file, out, g.seed);
            std::printf("wrote %zu videos, %zu frames to %s\n", ds.sequences.size(), ds.frame_count(), out.string().c_str());
        } else if (train->parsed()) {
            const RunConfig c = make_config(g, o);
            const auto r = cmd_train(c);
            std::printf("best spec #%zu: %s  mean CV recall %.4f\n", r.cv.best_index, describe(r.cv.best).c_str(),
                        r.cv.mean_recall[r.cv.best_index]);
        } else if (calibrate->parsed()) {
            const RunConfig c = make_config(g, o);
            const auto cal = cmd_calibrate(c, or_default(model, c.out_dir, "model.json"));
            if (cal.threshold) std::printf("threshold %.6g\n", *cal.threshold);
            else std::printf("threshold none (argmax)\n");
        } else if (tune->parsed()) {
            const RunConfig c = make_config(g, o);
            const auto opt = cmd_tune_delay(c, or_default(model, c.out_dir, "model.json"),
                                            or_default(calibration, c.out_dir, "calibration.json"));
            std::printf("delay %d ms\n", opt.best_delay_ms);
        } else if (eval->parsed()) {
            const RunConfig c = make_config(g, o);
            const auto report = cmd_evaluate(c, or_default(model, c.out_dir, "model.json"),
                                             or_default(calibration, c.out_dir, "calibration.json"),
                                             or_default(delay, c.out_dir, "delay.json"));
            std::cout << report_table({report});
        } else if (replay->parsed()) {
            ReplayOptions ro;
            ro.model_file = or_default(model, out, "model.json");
            ro.calibration_file = or_default(calibration, out, "calibration.json");
            if (delay) ro.delay_file = fs::path(*delay);
            ro.stream_file = *stream;
            ro.out_dir = out;
            ro.paced = paced;
            const auto r = cmd_replay(ro);
            std::printf("frames %zu  events %zu  throughput %.1f frames/s  latency mean %.3f ms max %.3f ms\n",
                        r.timestamps_ms.size(), r.events.size(), r.frames_per_second(), r.mean_latency_ms(),
                        r.max_latency_ms());
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code() == Errc::InvalidArgument ? 2 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

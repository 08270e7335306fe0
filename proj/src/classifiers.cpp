#include "hed/classifiers.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

namespace hed {

using nlohmann::json;

std::string_view family_name(Family f) noexcept {
    switch (f) {
    case Family::Svm: return "svm";
    case Family::RandomForest: return "rf";
    case Family::Mlp: return "mlp";
    }
    return "?";
}

Family family_from_string(std::string_view s) {
    if (s == "svm") return Family::Svm;
    if (s == "rf" || s == "random_forest") return Family::RandomForest;
    if (s == "mlp") return Family::Mlp;
    throw Error(Errc::InvalidSpec, "unknown model family '" + std::string(s) + "'");
}

std::string_view kernel_name(Kernel k) noexcept {
    switch (k) {
    case Kernel::Linear: return "linear";
    case Kernel::Polynomial: return "poly";
    case Kernel::Rbf: return "rbf";
    }
    return "?";
}

namespace {

Kernel kernel_from_string(std::string_view s) {
    if (s == "linear") return Kernel::Linear;
    if (s == "poly" || s == "polynomial") return Kernel::Polynomial;
    if (s == "rbf") return Kernel::Rbf;
    throw Error(Errc::InvalidSpec, "unknown kernel '" + std::string(s) + "'");
}

json gamma_to_json(const std::optional<double>& g) { return g ? json(*g) : json("1/n_features"); }

std::optional<double> gamma_from_json(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "1/n_features") throw Error(Errc::InvalidSpec, "gamma must be a number or \"1/n_features\"");
        return std::nullopt;
    }
    return j.get<double>();
}

} // namespace

Family family_of(const HyperparameterSpec& spec) noexcept {
    return std::visit(
        [](const auto& p) -> Family {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams>) return Family::Svm;
            else if constexpr (std::is_same_v<T, ForestParams>) return Family::RandomForest;
            else return Family::Mlp;
        },
        spec);
}

json spec_to_json(const HyperparameterSpec& spec) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams>) {
                return json{{"family", "svm"}, {"C", p.C}, {"kernel", std::string(kernel_name(p.kernel))},
                            {"degree", p.degree}, {"gamma", gamma_to_json(p.gamma)}};
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                return json{{"family", "rf"}, {"n_trees", p.n_trees}, {"max_depth", p.max_depth},
                            {"min_samples_leaf", p.min_samples_leaf}, {"max_features_fraction", p.max_features_fraction}};
            } else {
                return json{{"family", "mlp"}, {"hidden_layers", p.hidden_layers}, {"learning_rate", p.learning_rate},
                            {"epochs", p.epochs}, {"l2_penalty", p.l2_penalty}};
            }
        },
        spec);
}

HyperparameterSpec spec_from_json(const json& j) {
    try {
        HyperparameterSpec spec;
        switch (family_from_string(j.at("family").get<std::string>())) {
        case Family::Svm: {
            SvmParams p;
            p.C = j.value("C", p.C);
            if (j.contains("kernel")) p.kernel = kernel_from_string(j["kernel"].get<std::string>());
            p.degree = j.value("degree", p.degree);
            if (j.contains("gamma")) p.gamma = gamma_from_json(j["gamma"]);
            spec = p;
            break;
        }
        case Family::RandomForest: {
            ForestParams p;
            p.n_trees = j.value("n_trees", p.n_trees);
            p.max_depth = j.value("max_depth", p.max_depth);
            p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
            p.max_features_fraction = j.value("max_features_fraction", p.max_features_fraction);
            spec = p;
            break;
        }
        case Family::Mlp: {
            MlpParams p;
            p.hidden_layers = j.value("hidden_layers", p.hidden_layers);
            p.learning_rate = j.value("learning_rate", p.learning_rate);
            p.epochs = j.value("epochs", p.epochs);
            p.l2_penalty = j.value("l2_penalty", p.l2_penalty);
            spec = p;
            break;
        }
        }
        validate(spec);
        return spec;
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidSpec, e.what());
    }
}

std::string describe(const HyperparameterSpec& spec) { return spec_to_json(spec).dump(); }

void validate(const HyperparameterSpec& spec) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(Errc::InvalidSpec, what);
    };
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams>) {
                require(p.C > 0, "C must be > 0");
                require(p.degree >= 1, "degree must be >= 1");
                require(!p.gamma || *p.gamma > 0, "gamma must be > 0");
            } else if constexpr (std::is_same_v<T, ForestParams>) {
                require(p.n_trees >= 1, "n_trees must be >= 1");
                require(p.max_depth >= 1, "max_depth must be >= 1");
                require(p.min_samples_leaf >= 1, "min_samples_leaf must be >= 1");
                require(p.max_features_fraction > 0 && p.max_features_fraction <= 1, "max_features_fraction must be in (0,1]");
            } else {
                require(!p.hidden_layers.empty(), "hidden_layers must not be empty");
                for (int w : p.hidden_layers) require(w >= 1, "hidden layer width must be >= 1");
                require(p.learning_rate > 0, "learning_rate must be > 0");
                require(p.epochs >= 1, "epochs must be >= 1");
                require(p.l2_penalty >= 0, "l2_penalty must be >= 0");
            }
        },
        spec);
}

namespace {

template <typename T>
std::vector<T> axis(const json& j, const char* key, std::vector<T> fallback) {
    if (!j.contains(key)) return fallback;
    std::vector<T> out;
    for (const auto& v : j.at(key)) out.push_back(v.get<T>());
    if (out.empty()) throw Error(Errc::InvalidSpec, std::string("empty grid axis ") + key);
    return out;
}

} // namespace

std::vector<HyperparameterSpec> grid_from_json(const json& j) {
    std::vector<HyperparameterSpec> grid;
    try {
        if (j.contains("specs")) {
            for (const auto& s : j.at("specs")) grid.push_back(spec_from_json(s));
        } else {
            const Family family = family_from_string(j.at("family").get<std::string>());
            if (family == Family::Svm) {
                std::vector<std::optional<double>> gammas;
                if (j.contains("gamma")) {
                    for (const auto& g : j["gamma"]) gammas.push_back(gamma_from_json(g));
                } else {
                    gammas.push_back(std::nullopt);
                }
                for (double c : axis<double>(j, "C", {1.0}))
                    for (const auto& k : axis<std::string>(j, "kernel", {"rbf"}))
                        for (int d : axis<int>(j, "degree", {3}))
                            for (const auto& g : gammas) grid.push_back(SvmParams{c, kernel_from_string(k), d, g});
            } else if (family == Family::RandomForest) {
                for (int t : axis<int>(j, "n_trees", {50}))
                    for (int d : axis<int>(j, "max_depth", {12}))
                        for (int l : axis<int>(j, "min_samples_leaf", {1}))
                            for (double f : axis<double>(j, "max_features_fraction", {0.3}))
                                grid.push_back(ForestParams{t, d, l, f});
            } else {
                for (const auto& h : axis<std::vector<int>>(j, "hidden_layers", {{32}}))
                    for (double lr : axis<double>(j, "learning_rate", {0.01}))
                        for (int e : axis<int>(j, "epochs", {40}))
                            for (double l2 : axis<double>(j, "l2_penalty", {1e-4}))
                                grid.push_back(MlpParams{h, lr, e, l2});
            }
        }
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidSpec, e.what());
    }
    if (grid.empty()) throw Error(Errc::InvalidSpec, "grid is empty");
    for (const auto& s : grid) validate(s);
    return grid;
}

std::vector<HyperparameterSpec> default_grid(Family family) {
    switch (family) {
    case Family::Svm:
        return grid_from_json(json{{"family", "svm"},
                                   {"C", {0.1, 0.5, 1.0, 10.0}},
                                   {"kernel", {"linear", "poly", "rbf"}},
                                   {"degree", {2, 3}},
                                   {"gamma", {"1/n_features", 0.01}}});
    case Family::RandomForest:
        return grid_from_json(json{{"family", "rf"},
                                   {"n_trees", {25, 50}},
                                   {"max_depth", {8, 16}},
                                   {"min_samples_leaf", {1, 5}},
                                   {"max_features_fraction", {0.1, 0.3}}});
    case Family::Mlp:
        return grid_from_json(json{{"family", "mlp"},
                                   {"hidden_layers", {{32}, {64, 32}}},
                                   {"learning_rate", {0.01, 0.05}},
                                   {"epochs", {30, 60}},
                                   {"l2_penalty", {1e-4, 1e-3}}});
    }
    return {};
}

TrainedModel::TrainedModel(HyperparameterSpec spec, Fitted fitted, int n_classes, int n_features, std::uint64_t seed)
    : spec_(std::move(spec)), fitted_(std::move(fitted)), n_classes_(n_classes), n_features_(n_features),
      train_seed_(seed) {}

Eigen::VectorXd TrainedModel::decision_scores(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != n_features_) {
        throw Error(Errc::DimensionMismatch, "expected " + std::to_string(n_features_) + " features, got " +
                                                 std::to_string(x.size()));
    }
    return std::visit(
        [&](const auto& m) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SvmModel>) return detail::svm_scores(m, x);
            else if constexpr (std::is_same_v<T, ForestModel>) return detail::forest_scores(m, x, n_classes_);
            else return detail::mlp_scores(m, x);
        },
        fitted_);
}

Eigen::MatrixXd TrainedModel::decision_scores_rows(const Eigen::Ref<const Eigen::MatrixXd>& samples) const {
    Eigen::MatrixXd out(samples.rows(), n_classes_);
    for (Eigen::Index r = 0; r < samples.rows(); ++r) out.row(r) = decision_scores(Eigen::VectorXd(samples.row(r).transpose())).transpose();
    return out;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto row = j[r].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != cols) throw Error(Errc::DimensionMismatch, "matrix row width mismatch");
        for (Eigen::Index c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
    }
    return m;
}

} // namespace

json TrainedModel::to_json() const {
    json params = std::visit(
        [&](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, SvmModel>) {
                json machines = json::array();
                for (const auto& mc : m.machines) {
                    machines.push_back({{"bias", mc.bias},
                                        {"dual_coef", vector_to_json(mc.dual_coef)},
                                        {"support_vectors", matrix_to_json(mc.support_vectors)}});
                }
                return {{"gamma", m.gamma}, {"machines", std::move(machines)}};
            } else if constexpr (std::is_same_v<T, ForestModel>) {
                json trees = json::array();
                for (const auto& t : m.trees) {
                    trees.push_back({{"feature", t.feature},
                                     {"threshold", t.threshold},
                                     {"left", t.left},
                                     {"right", t.right},
                                     {"value", matrix_to_json(t.leaf_value)}});
                }
                return {{"trees", std::move(trees)}};
            } else {
                json weights = json::array(), biases = json::array();
                for (const auto& w : m.weights) weights.push_back(matrix_to_json(w));
                for (const auto& b : m.biases) biases.push_back(vector_to_json(b));
                return {{"weights", std::move(weights)}, {"biases", std::move(biases)}};
            }
        },
        fitted_);
    return json{{"format", "hed-model"},
                {"version", 1},
                {"family", std::string(family_name(family()))},
                {"spec", spec_to_json(spec_)},
                {"n_classes", n_classes_},
                {"n_features", n_features_},
                {"train_seed", train_seed_},
                {"params", std::move(params)}};
}

TrainedModel TrainedModel::from_json(const json& j, int expected_n_features) {
    try {
        if (j.at("format") != "hed-model" || j.at("version") != 1) {
            throw Error(Errc::MalformedRecord, "not a version-1 model file");
        }
        const int n_features = j.at("n_features").get<int>();
        if (n_features != expected_n_features) {
            throw Error(Errc::DimensionMismatch, "model has " + std::to_string(n_features) + " features, expected " +
                                                     std::to_string(expected_n_features));
        }
        const int n_classes = j.at("n_classes").get<int>();
        if (n_classes < 2 || n_classes > kNumClasses) throw Error(Errc::MalformedRecord, "invalid n_classes");
        auto spec = spec_from_json(j.at("spec"));
        const json& p = j.at("params");
        Fitted fitted;
        switch (family_of(spec)) {
        case Family::Svm: {
            SvmModel m;
            m.params = std::get<SvmParams>(spec);
            m.gamma = p.at("gamma").get<double>();
            for (const auto& mc : p.at("machines")) {
                SvmMachine machine;
                machine.bias = mc.at("bias").get<double>();
                machine.dual_coef = vector_from_json(mc.at("dual_coef"));
                machine.support_vectors = matrix_from_json(mc.at("support_vectors"), n_features);
                if (machine.support_vectors.rows() != machine.dual_coef.size()) {
                    throw Error(Errc::MalformedRecord, "support vector / coefficient count mismatch");
                }
                m.machines.push_back(std::move(machine));
            }
            const std::size_t expected_machines = n_classes == 2 ? 1 : static_cast<std::size_t>(n_classes);
            if (m.machines.size() != expected_machines) throw Error(Errc::MalformedRecord, "wrong SVM machine count");
            fitted = std::move(m);
            break;
        }
        case Family::RandomForest: {
            ForestModel m;
            m.params = std::get<ForestParams>(spec);
            for (const auto& t : p.at("trees")) {
                DecisionTree tree;
                tree.feature = t.at("feature").get<std::vector<int>>();
                tree.threshold = t.at("threshold").get<std::vector<double>>();
                tree.left = t.at("left").get<std::vector<int>>();
                tree.right = t.at("right").get<std::vector<int>>();
                tree.leaf_value = matrix_from_json(t.at("value"), n_classes);
                const auto nodes = static_cast<int>(tree.feature.size());
                if (nodes == 0 || tree.threshold.size() != tree.feature.size() || tree.left.size() != tree.feature.size() ||
                    tree.right.size() != tree.feature.size() || tree.leaf_value.rows() != nodes) {
                    throw Error(Errc::MalformedRecord, "inconsistent tree arrays");
                }
                for (int i = 0; i < nodes; ++i) {
                    const auto u = static_cast<std::size_t>(i);
                    if (tree.feature[u] >= n_features ||
                        (tree.feature[u] >= 0 && (tree.left[u] <= i || tree.left[u] >= nodes || tree.right[u] <= i ||
                                                  tree.right[u] >= nodes))) {
                        throw Error(Errc::MalformedRecord, "invalid tree node");
                    }
                }
                m.trees.push_back(std::move(tree));
            }
            fitted = std::move(m);
            break;
        }
        case Family::Mlp: {
            MlpModel m;
            m.params = std::get<MlpParams>(spec);
            const json& ws = p.at("weights");
            const json& bs = p.at("biases");
            if (ws.size() != bs.size() || ws.empty()) throw Error(Errc::MalformedRecord, "weights/biases mismatch");
            Eigen::Index in = n_features;
            for (std::size_t l = 0; l < ws.size(); ++l) {
                m.weights.push_back(matrix_from_json(ws[l], in));
                m.biases.push_back(vector_from_json(bs[l]));
                if (m.biases.back().size() != m.weights.back().rows()) throw Error(Errc::MalformedRecord, "bias size");
                in = m.weights.back().rows();
            }
            if (in != n_classes) throw Error(Errc::MalformedRecord, "output layer width != n_classes");
            fitted = std::move(m);
            break;
        }
        }
        return TrainedModel(std::move(spec), std::move(fitted), n_classes, n_features, j.at("train_seed").get<std::uint64_t>());
    } catch (const json::exception& e) {
        throw Error(Errc::MalformedRecord, std::string("model file: ") + e.what());
    }
}

TrainedModel train(const HyperparameterSpec& spec, const Eigen::Ref<const Eigen::MatrixXd>& samples,
                   std::span<const ClassLabel> labels, std::uint64_t seed, int n_classes) {
    validate(spec);
    if (static_cast<std::size_t>(samples.rows()) != labels.size()) {
        throw Error(Errc::LengthMismatch, "sample and label counts differ");
    }
    if (samples.cols() == 0) throw Error(Errc::DimensionMismatch, "zero-dimensional samples");
    if (!samples.allFinite()) throw Error(Errc::NonFinite, "training samples contain NaN or Inf");

    std::vector<int> y(labels.size());
    int max_label = 0;
    std::set<int> present;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y[i] = to_int(labels[i]);
        max_label = std::max(max_label, y[i]);
        present.insert(y[i]);
    }
    if (n_classes == 0) n_classes = std::max(2, max_label + 1);
    if (max_label >= n_classes) throw Error(Errc::LabelOutOfRange, "label exceeds n_classes");
    if (present.size() < 2) throw Error(Errc::DegenerateData, "training data holds a single class");

    TrainedModel::Fitted fitted = std::visit(
        [&](const auto& p) -> TrainedModel::Fitted {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SvmParams>) return detail::fit_svm(p, samples, y, n_classes);
            else if constexpr (std::is_same_v<T, ForestParams>) return detail::fit_forest(p, samples, y, n_classes, seed);
            else return detail::fit_mlp(p, samples, y, n_classes, seed);
        },
        spec);
    return TrainedModel(spec, std::move(fitted), n_classes, static_cast<int>(samples.cols()), seed);
}

int argmax_class(const Eigen::Ref<const Eigen::VectorXd>& scores) noexcept {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = static_cast<int>(c);
    return best;
}

GridSearchResult grid_search_cv(const std::vector<HyperparameterSpec>& grid, const Dataset& train_set, int k,
                                std::uint64_t seed, int n_classes, const TrackerConfig& tracker) {
    if (grid.empty()) throw Error(Errc::InvalidSpec, "grid is empty");
    const auto samples = extract_dataset_samples(train_set, tracker);
    std::unordered_map<std::string, const VideoSamples*> by_id;
    for (const auto& s : samples) by_id[s.video_id] = &s;

    const auto folds = kfold_videos(train_set, k, seed);
    GridSearchResult result;
    result.fold_recall.assign(grid.size(), std::vector<double>(folds.size(), std::numeric_limits<double>::quiet_NaN()));

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<const VideoSamples*> tr, va;
        for (const auto& v : folds[f].train.sequences) tr.push_back(by_id.at(v.video_id));
        for (const auto& v : folds[f].validation.sequences) va.push_back(by_id.at(v.video_id));
        const SampleSet train_samples = stack_samples(tr);
        const SampleSet val_samples = stack_samples(va);

        std::size_t positives = 0;
        for (auto l : val_samples.labels) positives += l == ClassLabel::Emergency;
        if (positives == 0) continue;

        for (std::size_t s = 0; s < grid.size(); ++s) {
            const auto model = train(grid[s], train_samples.features, train_samples.labels, derive_seed(seed, f), n_classes);
            std::size_t tp = 0;
            for (Eigen::Index r = 0; r < val_samples.features.rows(); ++r) {
                if (val_samples.labels[static_cast<std::size_t>(r)] != ClassLabel::Emergency) continue;
                tp += argmax_class(model.decision_scores(Eigen::VectorXd(val_samples.features.row(r).transpose()))) ==
                      to_int(ClassLabel::Emergency);
            }
            result.fold_recall[s][f] = static_cast<double>(tp) / static_cast<double>(positives);
        }
    }

    result.mean_recall.assign(grid.size(), 0.0);
    for (std::size_t s = 0; s < grid.size(); ++s) {
        double sum = 0.0;
        int n = 0;
        for (double r : result.fold_recall[s]) {
            if (std::isnan(r)) continue;
            sum += r;
            ++n;
        }
        result.mean_recall[s] = n > 0 ? sum / n : 0.0;
        if (result.mean_recall[s] > result.mean_recall[result.best_index]) result.best_index = s;
    }
    result.best = grid[result.best_index];
    return result;
}

} // namespace hed

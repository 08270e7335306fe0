#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "hed/calibration.hpp"
#include "hed/classifiers.hpp"

using namespace hed;

namespace {

/// Plain grid scan: predict, count Emergency TP/FP/FN, keep the first best F1.
int brute_force_grid_index(const Eigen::MatrixXd& scores, const std::vector<ClassLabel>& labels) {
    int best = -1;
    double best_f1 = -1.0;
    for (int i = 0; i < 500; ++i) {
        const double t = i * 0.001;
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (Eigen::Index r = 0; r < scores.rows(); ++r) {
            const Eigen::VectorXd p = softmax(scores.row(r).transpose());
            int pred = 0;
            for (int c = 1; c < p.size(); ++c)
                if (p[c] > p[pred]) pred = c;
            if (p[1] >= t) pred = 1;
            const bool truth = labels[static_cast<std::size_t>(r)] == ClassLabel::Emergency;
            tp += pred == 1 && truth;
            fp += pred == 1 && !truth;
            fn += pred != 1 && truth;
        }
        const double f1 = tp == 0 ? 0.0 : 2.0 * tp / (2.0 * tp + fp + fn);
        if (f1 > best_f1) {
            best_f1 = f1;
            best = i;
        }
    }
    return best;
}

/// J of every candidate counted directly; first maximum wins.
double brute_force_youden(const std::vector<double>& p, const std::vector<int>& y) {
    std::set<double> distinct(p.begin(), p.end());
    std::vector<double> cand{0.0, 1.0};
    for (auto it = distinct.begin(); std::next(it) != distinct.end(); ++it) cand.push_back((*it + *std::next(it)) / 2.0);
    std::sort(cand.begin(), cand.end());
    double best_t = 0.0;
    std::int64_t best_num = std::numeric_limits<std::int64_t>::min();
    std::int64_t npos = std::count(y.begin(), y.end(), 1), nneg = static_cast<std::int64_t>(y.size()) - npos;
    for (double t : cand) {
        std::int64_t tp = 0, tn = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            tp += p[i] >= t && y[i] == 1;
            tn += p[i] < t && y[i] == 0;
        }
        const std::int64_t num = tp * nneg + tn * npos - npos * nneg;
        if (num > best_num) {
            best_num = num;
            best_t = t;
        }
    }
    return best_t;
}

Eigen::MatrixXd random_scores(Rng& rng, int n, int k, std::vector<ClassLabel>& labels) {
    Eigen::MatrixXd s(n, k);
    labels.clear();
    for (int r = 0; r < n; ++r) {
        const int truth = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
        labels.push_back(label_from_int(truth));
        for (int c = 0; c < k; ++c) s(r, c) = rng.normal(c == truth ? 0.7 : 0.0, 1.0);
        // coarse scores produce exact ties between samples
        if (rng.bernoulli(0.3)) s.row(r) = (s.row(r) * 4.0).array().round() / 4.0;
    }
    if (std::none_of(labels.begin(), labels.end(), [](auto l) { return l == ClassLabel::Emergency; })) labels[0] = ClassLabel::Emergency;
    return s;
}

} // namespace

TEST_CASE("softmax closed forms") {
    const Eigen::Vector2d a = softmax(Eigen::Vector2d(0, 0));
    CHECK(a[0] == 0.5);
    CHECK(a[1] == 0.5);
    const Eigen::VectorXd b = softmax(Eigen::Vector2d(std::log(2.0), 0));
    CHECK(b[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(b[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    const Eigen::VectorXd c = softmax(Eigen::Vector3d(1000, 1000, 1000));
    for (int i = 0; i < 3; ++i) CHECK(c[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    try {
        (void)softmax(Eigen::Vector2d(std::nan(""), 0));
        FAIL("expected NonFinite");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonFinite);
    }
}

TEST_CASE("softmax shift invariance and permutation equivariance") {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
        Eigen::Vector3d s(rng.normal(0, 50), rng.normal(0, 50), rng.normal(0, 50));
        const Eigen::VectorXd p = softmax(s);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
        CHECK(p.minCoeff() >= 0.0);
        const Eigen::VectorXd q = softmax((s.array() + rng.uniform(-100, 100)).matrix());
        CHECK((p - q).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::Vector3d perm(s[2], s[0], s[1]);
        const Eigen::VectorXd pp = softmax(perm);
        CHECK(std::abs(pp[0] - p[2]) <= 1e-15);
        CHECK(std::abs(pp[1] - p[0]) <= 1e-15);
    }
    const Eigen::MatrixXd rows = softmax_rows(Eigen::MatrixXd::Random(10, 3));
    CHECK((rows.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("youden examples") {
    const std::vector<double> p{0.2, 0.3, 0.7, 0.9};
    const Calibration a = youden_threshold(p, std::vector<int>{0, 0, 1, 1});
    CHECK(a.mode == CalibrationMode::Binary);
    CHECK(*a.threshold == doctest::Approx(0.5));
    const auto best = std::max_element(a.curve.begin(), a.curve.end(), [](auto x, auto y) { return x.objective < y.objective; });
    CHECK(best->objective == doctest::Approx(1.0));

    // anticorrelated: best J is 0, reached first at the all-positive threshold
    const Calibration b = youden_threshold(p, std::vector<int>{1, 1, 0, 0});
    CHECK(*b.threshold == 0.0);
    CHECK(b.curve.front().objective == 0.0);

    try {
        (void)youden_threshold(p, std::vector<int>{1, 1, 1, 1});
        FAIL("expected SingleClass");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::SingleClass);
    }
}

TEST_CASE("youden matches an exhaustive candidate scan") {
    Rng rng(2);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = trial < 5 ? 10000 : 2 + rng.below(300);
        std::vector<double> p(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = rng.bernoulli(0.4) ? 1 : 0;
            p[i] = std::clamp(rng.normal(y[i] ? 0.6 : 0.4, 0.2), 0.0, 1.0);
            if (rng.bernoulli(0.3)) p[i] = std::round(p[i] * 20) / 20;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(*youden_threshold(p, y).threshold == brute_force_youden(p, y));
    }
}

TEST_CASE("emergency threshold matches the brute-force scan") {
    Rng rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<ClassLabel> labels;
        const Eigen::MatrixXd s = random_scores(rng, 20 + static_cast<int>(rng.below(400)), 3, labels);
        const Calibration c = emergency_threshold(s, labels);
        CHECK(c.mode == CalibrationMode::Multiclass);
        CHECK(c.curve.size() == 500);
        CHECK(*c.grid_index == brute_force_grid_index(s, labels));
        CHECK(*c.threshold == threshold_grid_value(*c.grid_index));
        CHECK(*c.threshold >= 0.0);
        CHECK(*c.threshold < 0.5);
    }
}

TEST_CASE("emergency as a frequent runner-up is recovered by a lower threshold") {
    // true emergencies: Emergency probability 0.3 behind Normal at 0.5
    Eigen::MatrixXd s(40, 3);
    std::vector<ClassLabel> labels;
    for (int r = 0; r < 40; ++r) {
        const bool e = r % 2 == 0;
        const Eigen::Vector3d p = e ? Eigen::Vector3d(0.5, 0.3, 0.2) : Eigen::Vector3d(0.8, 0.05, 0.15);
        s.row(r) = p.array().log().matrix().transpose();
        labels.push_back(e ? ClassLabel::Emergency : ClassLabel::Normal);
    }
    const Calibration c = emergency_threshold(s, labels);
    CHECK(*c.threshold <= 0.3);
    std::int64_t argmax_tp = 0, thresh_tp = 0;
    const Eigen::MatrixXd probs = softmax_rows(s);
    for (int r = 0; r < 40; ++r) {
        if (labels[static_cast<std::size_t>(r)] != ClassLabel::Emergency) continue;
        argmax_tp += classify_with_threshold(probs.row(r).transpose(), Calibration{}) == ClassLabel::Emergency;
        thresh_tp += classify_with_threshold(probs.row(r).transpose(), c) == ClassLabel::Emergency;
    }
    CHECK(argmax_tp == 0);
    CHECK(thresh_tp == 20);
}

TEST_CASE("argmax-separable scores: the first grid point above every non-emergency probability") {
    Eigen::MatrixXd s(6, 3);
    s << 3, 0, 0,  // p1 ~ 0.045
        0, 3, 0,   //
        0, 0, 3,   //
        0, 4, 0,   //
        2, 0, 1,   //
        0, 0.5, 2; // p1 ~ 0.15
    const std::vector<ClassLabel> labels{ClassLabel::Normal, ClassLabel::Emergency, ClassLabel::Pause,
                                         ClassLabel::Emergency, ClassLabel::Normal, ClassLabel::Pause};
    const Calibration c = emergency_threshold(s, labels);
    const Eigen::MatrixXd p = softmax_rows(s);
    double max_neg = 0.0;
    for (int r : {0, 2, 4, 5}) max_neg = std::max(max_neg, p(r, 1));
    CHECK(*c.threshold > max_neg);
    CHECK(*c.threshold - 0.001 <= max_neg);
    CHECK(c.curve[static_cast<std::size_t>(*c.grid_index)].objective == 1.0);
    // at t = 0 every sample is Emergency
    CHECK(c.curve[0].objective == doctest::Approx(4.0 / 8.0));
}

TEST_CASE("no emergency samples") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(3, 3);
    const std::vector<ClassLabel> labels(3, ClassLabel::Normal);
    try {
        (void)emergency_threshold(s, labels);
        FAIL("expected NoEmergencySamples");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NoEmergencySamples);
    }
}

TEST_CASE("classify_with_threshold") {
    Calibration c;
    c.threshold = 0.15;
    CHECK(classify_with_threshold(Eigen::Vector3d(0.5, 0.2, 0.3), c) == ClassLabel::Emergency);
    CHECK(classify_with_threshold(Eigen::Vector3d(0.5, 0.1, 0.4), c) == ClassLabel::Normal);
    CHECK(classify_with_threshold(Eigen::Vector3d(0.3, 0.1, 0.6), c) == ClassLabel::Pause);
    CHECK(classify_with_threshold(Eigen::Vector3d(0.5, 0.2, 0.3), Calibration{}) == ClassLabel::Normal);
    CHECK(classify_with_threshold(Eigen::Vector3d(0.4, 0.4, 0.2), Calibration{}) == ClassLabel::Normal);

    Calibration binary;
    binary.mode = CalibrationMode::Binary;
    binary.threshold = 0.7;
    CHECK(classify_with_threshold(Eigen::Vector2d(0.35, 0.65), binary) == ClassLabel::Normal);
    CHECK(classify_with_threshold(Eigen::Vector2d(0.3, 0.7), binary) == ClassLabel::Emergency);
}

TEST_CASE("lowering the threshold never lowers Emergency recall") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ClassLabel> labels;
        const Eigen::MatrixXd probs = softmax_rows(random_scores(rng, 200, 3, labels));
        std::int64_t prev_tp = -1;
        for (int i = 499; i >= 0; i -= 7) {
            Calibration c;
            c.threshold = threshold_grid_value(i);
            std::int64_t tp = 0;
            for (Eigen::Index r = 0; r < probs.rows(); ++r)
                tp += labels[static_cast<std::size_t>(r)] == ClassLabel::Emergency &&
                      classify_with_threshold(probs.row(r).transpose(), c) == ClassLabel::Emergency;
            CHECK(tp >= prev_tp);
            prev_tp = tp;
        }
    }
}

TEST_CASE("calibration file and curve exports") {
    Rng rng(5);
    std::vector<ClassLabel> labels;
    const Eigen::MatrixXd scores = random_scores(rng, 100, 3, labels);
    const Calibration c = emergency_threshold(scores, labels);
    const Calibration back = calibration_from_json(nlohmann::json::parse(calibration_to_json(c).dump()));
    CHECK(back.threshold == c.threshold);
    CHECK(back.grid_index == c.grid_index);
    CHECK(back.curve.size() == c.curve.size());
    CHECK(back.curve[17].objective == c.curve[17].objective);
    CHECK_THROWS_AS(calibration_from_json(nlohmann::json{{"format", "other"}}), Error);

    const auto dir = std::filesystem::temp_directory_path();
    write_threshold_curve_csv(c, dir / "hed_curve.csv");
    std::ifstream in(dir / "hed_curve.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "threshold,objective");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 500);

    const Calibration y = youden_threshold(std::vector<double>{0.1, 0.4, 0.8}, std::vector<int>{0, 1, 1});
    write_roc_csv(y, dir / "hed_roc.csv");
    std::ifstream roc(dir / "hed_roc.csv");
    std::getline(roc, line);
    CHECK(line == "threshold,fpr,tpr");
    std::getline(roc, line);
    CHECK(line.rfind("0,1,1", 0) == 0);
    std::filesystem::remove(dir / "hed_curve.csv");
    std::filesystem::remove(dir / "hed_roc.csv");
}

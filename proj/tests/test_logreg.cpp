#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "propdetect/error.hpp"
#include "propdetect/logreg.hpp"
#include "propdetect/random.hpp"
#include "propdetect/textio.hpp"
#include "synthetic.hpp"

using namespace propdetect;

namespace {

// Direct summation, independent of the Eigen expression in the library.
double oracle_objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w, double b,
                        double l2) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double z = b;
        for (Eigen::Index j = 0; j < x.cols(); ++j) z += x(i, j) * w[j];
        const double p = 1.0 / (1.0 + std::exp(-z));
        loss -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    }
    double reg = 0.0;
    for (Eigen::Index j = 0; j < w.size(); ++j) reg += w[j] * w[j];
    return loss / static_cast<double>(x.rows()) + 0.5 * l2 * reg;
}

Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = uniform01(rng) * 4.0 - 2.0;
    return m;
}

}  // namespace

TEST_CASE("objective matches direct summation and finite differences") {
    Rng rng(12);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 3 + static_cast<int>(uniform_index(rng, 10));
        const int d = 1 + static_cast<int>(uniform_index(rng, 5));
        const auto x = random_matrix(rng, n, d);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = uniform01(rng) < 0.5 ? 1.0 : 0.0;
        const Eigen::VectorXd w = random_matrix(rng, d, 1);
        const double b = uniform01(rng) - 0.5;
        const double l2 = trial % 2 == 0 ? 0.0 : 0.3;

        const auto obj = logistic_objective(x, y, w, b, l2);
        CHECK(obj.value == doctest::Approx(oracle_objective(x, y, w, b, l2)).epsilon(1e-12));

        const double h = 1e-6;
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd wp = w, wm = w;
            wp[j] += h;
            wm[j] -= h;
            const double fd = (oracle_objective(x, y, wp, b, l2) - oracle_objective(x, y, wm, b, l2)) / (2 * h);
            CHECK(std::abs(fd - obj.grad_weights[j]) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
        const double fdb = (oracle_objective(x, y, w, b + h, l2) - oracle_objective(x, y, w, b - h, l2)) / (2 * h);
        CHECK(std::abs(fdb - obj.grad_bias) <= 1e-5 * std::max(1.0, std::abs(fdb)));
    }
}

TEST_CASE("separable four points") {
    Eigen::MatrixXd x(4, 1);
    x << -2, -1, 1, 2;
    const std::vector<bool> y = {false, false, true, true};
    LogRegOptions o;
    o.l2 = 0.0;
    o.epochs = 500;
    const auto m = train_logreg(x, y, o);
    for (int i = 0; i < 4; ++i) {
        const double p = sigmoid(m.weights[0] * x(i, 0) + m.bias);
        CHECK(apply_threshold(p, DecisionRule(0.5)) == y[static_cast<std::size_t>(i)]);
    }
    CHECK(m.weights[0] > 0);
}

TEST_CASE("zero epochs predicts one half") {
    Eigen::MatrixXd x(2, 3);
    x << 1, 2, 3, -1, 0, 5;
    LogRegOptions o;
    o.epochs = 0;
    const auto m = train_logreg(x, {true, false}, o);
    CHECK(m.weights.isZero());
    CHECK(m.bias == 0.0);
    CHECK(sigmoid(m.weights.dot(x.row(0).transpose()) + m.bias) == 0.5);
}

TEST_CASE("loss history never increases") {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_matrix(rng, 30, 4);
        std::vector<bool> y;
        for (int i = 0; i < 30; ++i) y.push_back(x(i, 0) + 0.5 * (uniform01(rng) - 0.5) > 0);
        y[0] = true;
        y[1] = false;
        std::vector<double> history;
        LogRegOptions o;
        o.epochs = 100;
        o.learning_rate = 5.0;  // large enough to force step halving
        o.standardize = trial % 2 == 1;
        o.loss_history = &history;
        train_logreg(x, y, o);
        REQUIRE(!history.empty());
        for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);
    }
}

TEST_CASE("standardized training predicts on raw features") {
    Rng rng(5);
    auto x = random_matrix(rng, 40, 2);
    x.col(1) *= 1000.0;
    std::vector<bool> y;
    for (int i = 0; i < 40; ++i) y.push_back(x(i, 1) > 0);
    LogRegOptions o;
    o.standardize = true;
    const auto m = train_logreg(x, y, o);
    int correct = 0;
    for (int i = 0; i < 40; ++i) {
        const double p = sigmoid(m.weights.dot(x.row(i).transpose()) + m.bias);
        correct += (p >= 0.5) == y[static_cast<std::size_t>(i)];
    }
    CHECK(correct >= 38);
}

TEST_CASE("training errors") {
    Eigen::MatrixXd x(2, 1);
    x << 1, 2;
    CHECK_THROWS_AS(train_logreg(x, {true, true}, {}), DataError);
    CHECK_THROWS_AS(train_logreg(x, {true}, {}), UsageError);
}

TEST_CASE("threshold is inclusive") {
    CHECK(apply_threshold(0.35, DecisionRule(0.35)));
    CHECK_FALSE(apply_threshold(0.3499999, DecisionRule(0.35)));
    CHECK(apply_threshold(0.5, DecisionRule(0.5)));
    CHECK_FALSE(apply_threshold(0.4999999, DecisionRule(0.5)));
    CHECK_THROWS_AS(DecisionRule(0.0), UsageError);
    CHECK_THROWS_AS(DecisionRule(1.0), UsageError);
}

TEST_CASE("lowering tau never loses positives") {
    Rng rng(21);
    std::vector<double> p;
    std::vector<bool> y;
    for (int i = 0; i < 300; ++i) {
        p.push_back(uniform01(rng));
        y.push_back(uniform01(rng) < 0.4);
    }
    auto count = [&](double tau, bool recall) {
        int hit = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
            if (apply_threshold(p[i], DecisionRule(tau)) && (!recall || y[i])) ++hit;
        return hit;
    };
    for (double hi = 0.05; hi < 0.95; hi += 0.05) {
        const double lo = hi - 0.04;
        CHECK(count(lo, false) >= count(hi, false));
        CHECK(count(lo, true) >= count(hi, true));
    }
}

TEST_CASE("select_tau") {
    // At 0.5 one positive is missed; 0.4 recovers it with no false positive.
    const std::vector<double> p = {0.9, 0.45, 0.1, 0.2};
    const std::vector<bool> y = {true, true, false, false};
    CHECK(select_tau(p, y, kDefaultTauGrid) == 0.4);
    // Every grid entry gives the same F1: the first one wins.
    CHECK(select_tau({0.9, 0.1}, {true, false}, kDefaultTauGrid) == 0.5);
    // Going lower only adds a false positive.
    CHECK(select_tau({0.9, 0.38}, {true, false}, kDefaultTauGrid) == 0.5);
    CHECK(select_tau({0.9, 0.36}, {true, true}, kDefaultTauGrid) == 0.35);
    CHECK_THROWS_AS(select_tau(p, y, {}), UsageError);
}

TEST_CASE("model files round trip byte-exactly") {
    Rng rng(8);
    std::vector<FeatureVector> feats;
    std::vector<bool> y;
    for (int i = 0; i < 20; ++i) {
        FeatureVector f;
        f.schema_id = "toy/v1";
        f.push("a", uniform01(rng));
        f.push("b", uniform01(rng) * 1e-7);
        f.push("c", uniform01(rng) * 1e9);
        feats.push_back(f);
        y.push_back(i % 3 == 0);
    }
    LogRegOptions o;
    o.standardize = true;
    const auto m = train_logreg(feats, y, o);
    const auto text = save_logreg(m);
    const auto back = load_logreg(text);
    CHECK(save_logreg(back) == text);
    CHECK(back.weights == m.weights);
    CHECK(back.bias == m.bias);
    CHECK(back.schema_id == "toy/v1");
    for (const auto& f : feats) CHECK(predict_proba(back, f) == predict_proba(m, f));

    FeatureVector other = feats[0];
    other.schema_id = "other/v1";
    CHECK_THROWS_AS(predict_proba(m, other), DataError);
    CHECK_THROWS_AS(load_logreg("propdetect-logreg\t1\nbias\tnope\n"), DataError);
    CHECK_THROWS_AS(load_logreg("something else\n"), DataError);
}

TEST_CASE("prediction files") {
    testsupport::TempDir dir("logreg");
    const std::vector<SentencePrediction> preds = {{"111", 1, 0.25, "m"}, {"111", 3, 1.0, "m"}, {"111", 1, 0.5, "n"}};
    write_file(dir / "ok.tsv", format_sentence_predictions(preds));
    const auto back = read_sentence_predictions(dir / "ok.tsv");
    REQUIRE(back.size() == 3);
    CHECK(back[1].probability == 1.0);
    CHECK(back[2].model_id == "n");

    auto expect_error = [&](const std::string& content, const std::string& fragment) {
        write_file(dir / "bad.tsv", content);
        try {
            read_sentence_predictions(dir / "bad.tsv");
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(std::string(e.what()).find(fragment) != std::string::npos);
        }
    };
    expect_error("111\t1\t0.2\tm\n111\t2\t1.2\tm\n", "bad.tsv:2:");
    expect_error("111\t1\t0.2\tm\n111\t1\t0.3\tm\n", "duplicate");
    expect_error("111\t1\t0.2\n", "bad.tsv:1:");
    expect_error("111\t0\t0.2\tm\n", "bad.tsv:1:");
    expect_error("111\t1\tNaN\tm\n", "bad.tsv:1:");
}

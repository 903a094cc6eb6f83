#include <doctest.h>

#include "mmra/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace mmra;
using doctest::Approx;

namespace {

// 2 x 2 confusion whose class 0 has precision 0.97 and recall 0.99.
ConfusionMatrix dharma_row() {
    ConfusionMatrix m(2, 2);
    m << 9603, 97, 297, 500;
    return m;
}

Prediction with_confidence(double c, int predicted, int classes = 2) {
    Vector p = Vector::Constant(classes, (1.0 - c) / (classes - 1));
    p(predicted) = c;
    return make_prediction(p);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("per-class and macro F1") {
    ConfusionMatrix diag = ConfusionMatrix::Zero(3, 3);
    diag.diagonal() << 4, 5, 6;
    CHECK(macro_f1(diag) == 1.0);
    CHECK(accuracy(diag) == 1.0);

    const auto f1 = per_class_f1(dharma_row());
    CHECK(f1[0] == Approx(0.98).epsilon(0.005 / 0.98));
    CHECK(std::abs(f1[0] - 0.98) <= 0.005);

    ConfusionMatrix m(3, 3);
    m << 5, 2, 1, 0, 3, 3, 1, 0, 7;
    const auto got = per_class_f1(m);
    for (Index c = 0; c < 3; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (Index r = 0; r < 3; ++r)
            for (Index k = 0; k < 3; ++k) {
                if (r == c && k == c) tp += m(r, k);
                else if (k == c) fp += m(r, k);
                else if (r == c) fn += m(r, k);
            }
        const double p = tp / (tp + fp), r = tp / (tp + fn);
        CHECK(got[static_cast<std::size_t>(c)] == Approx(2 * p * r / (p + r)));
    }
    CHECK(macro_f1(m) == Approx((got[0] + got[1] + got[2]) / 3.0));

    ConfusionMatrix absent = ConfusionMatrix::Zero(2, 2);
    absent(0, 0) = 3;
    CHECK(per_class_f1(absent)[1] == 0.0);
}

TEST_CASE("expected calibration error") {
    const std::vector<Prediction> perfect{with_confidence(1.0, 0), with_confidence(1.0, 1)};
    const std::vector<int> truth{0, 1};
    CHECK(ece(perfect, truth).ece == 0.0);
    const std::vector<int> wrong{1, 0};
    CHECK(ece(perfect, wrong).ece == Approx(1.0));

    const std::vector<double> conf{0.9, 0.8, 0.3, 0.4};
    const std::vector<std::uint8_t> correct{1, 1, 1, 0};
    const auto r = ece(conf, correct, 2);
    CHECK(r.ece == Approx(0.15));
    REQUIRE(r.bins.size() == 2);
    CHECK(r.bins[0].count == 2);
    CHECK(r.bins[0].confidence == Approx(0.35));
    CHECK(r.bins[1].accuracy == Approx(1.0));

    // Right-closed bins: 0.5 belongs to the lower bin when B = 2.
    const std::vector<double> edge{0.5};
    const std::vector<std::uint8_t> one{1};
    CHECK(ece(edge, one, 2).bins[0].count == 1);
}

TEST_CASE("ECE of hand-binned fixtures") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> conf;
        std::vector<std::uint8_t> ok;
        for (int i = 0; i < 200; ++i) {
            conf.push_back(std::max(1e-9, u(rng)));
            ok.push_back(u(rng) < 0.6);
        }
        const int B = 15;
        const double expect = test::hand_binned_ece(conf, ok, B);
        CHECK(ece(conf, ok, B).ece == Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("perfectly calibrated dumps have small ECE") {
    const int N = 4000;
    int within = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> conf;
        std::vector<std::uint8_t> ok;
        for (int i = 0; i < N; ++i) {
            const double c = 0.5 + 0.5 * u(rng);
            conf.push_back(c);
            ok.push_back(u(rng) < c);
        }
        within += ece(conf, ok).ece <= 2.0 / std::sqrt(static_cast<double>(N));
    }
    CHECK(within >= 9);
}

TEST_CASE("negative log likelihood") {
    const std::vector<Prediction> sure{with_confidence(1.0, 0), with_confidence(1.0, 1)};
    const std::vector<int> truth{0, 1};
    CHECK(nll(sure, truth) == Approx(0.0));

    const std::vector<Prediction> e{with_confidence(std::exp(-1.0), 0), with_confidence(std::exp(-1.0), 1)};
    CHECK(nll(e, truth) == Approx(1.0));

    const std::vector<Prediction> mixed{with_confidence(0.5, 0), with_confidence(0.8, 0)};
    CHECK(nll(mixed, truth) == Approx((std::log(2.0) - std::log(0.2)) / 2.0));
}

TEST_CASE("reliability csv") {
    test::TempDir dir("rel");
    const std::vector<double> conf{0.9, 0.3};
    const std::vector<std::uint8_t> ok{1, 0};
    write_reliability_csv(dir / "r.csv", ece(conf, ok, 2));
    const auto text = test::read_text(dir / "r.csv");
    CHECK(text.rfind("bin,lower,upper,count,confidence,accuracy\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

}  // TEST_SUITE

#include <doctest.h>

#include "grad_suite.hpp"
#include "mmra/classifier.hpp"
#include "support.hpp"

#include <algorithm>
#include <numeric>
#include <set>

using namespace mmra;
using doctest::Approx;

namespace {

ClassifierModel linear_model(const Matrix& W, const Vector& b) {
    std::vector<std::string> vocab;
    for (Index c = 0; c < W.rows(); ++c) vocab.push_back("c" + std::to_string(c));
    auto m = ClassifierModel::create(W.cols(), {}, vocab, 0);
    m.layers[0].W = W;
    m.layers[0].b = b;
    return m;
}

Matrix separable(int per_class, std::vector<int>& labels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    const Matrix centres = (Matrix(2, 3) << 3, -3, 0, 0, 0, 4).finished();
    Matrix X(2, 3 * per_class);
    labels.clear();
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per_class; ++i) {
            const Index j = c * per_class + i;
            X(0, j) = centres(0, c) + noise(rng);
            X(1, j) = centres(1, c) + noise(rng);
            labels.push_back(c);
        }
    return X;
}

}  // namespace

TEST_SUITE("classifier") {

TEST_CASE("prediction tie rule and margins") {
    const auto p = make_prediction(Vector::Constant(6, 1.0 / 6.0));
    CHECK(p.predicted == 0);
    CHECK(p.confidence == Approx(1.0 / 6.0));

    const auto model = linear_model(Matrix::Identity(3, 3), Vector::Zero(3));
    CHECK(classify(model, (Vector(3) << 0, 9, 1).finished()).predicted == 1);

    CHECK(top2_margin((Vector(3) << 0.5, 0.3, 0.2).finished()) == Approx(0.2));
    CHECK(top2_margin((Vector(1) << 1.0).finished()) == 1.0);
}

TEST_CASE("hand-evaluated probabilities") {
    const Matrix W = (Matrix(2, 2) << 1, 0, 0, 1).finished();
    const auto model = linear_model(W, (Vector(2) << 0, std::log(3.0)).finished());
    const auto p = classify(model, Vector::Zero(2));
    CHECK(p.probs(0) == Approx(0.25));
    CHECK(p.probs(1) == Approx(0.75));
    CHECK(p.predicted == 1);
}

TEST_CASE("loss value and gradient") {
    const auto model = linear_model(Matrix::Zero(2, 1), (Vector(2) << std::log(1.0), std::log(3.0)).finished());
    const Matrix X = Matrix::Zero(1, 1);
    const std::vector<int> y{0};
    const std::vector<double> w{2.0, 1.0};
    const auto l = classifier_loss_and_gradients(model, X, y, w);
    CHECK(l.loss == Approx(2.0 * std::log(4.0)));
    CHECK(l.grads.db[0](0) == Approx(2.0 * (0.25 - 1.0)));
    CHECK(l.grads.db[0](1) == Approx(2.0 * 0.75));
    CHECK(test::classifier_grad_suite(20, 4).failures == 0);
}

TEST_CASE("sampling order") {
    std::vector<int> y;
    const Matrix X = separable(10, y, 1);
    auto model = ClassifierModel::create(2, std::vector<Index>{4}, {"A", "B", "C"}, 1);
    ClassifierTrainConfig cfg;
    cfg.batch_size = 7;
    cfg.lr = 0.0;
    ClassifierTrainer trainer(model, X, y, cfg);
    std::vector<Index> seen;
    trainer.set_batch_observer([&](std::span<const Index> b) { seen.insert(seen.end(), b.begin(), b.end()); });

    trainer.run_epoch(std::vector<double>(30, 2.0));
    std::vector<Index> sorted = seen;
    std::sort(sorted.begin(), sorted.end());
    std::vector<Index> all(30);
    std::iota(all.begin(), all.end(), Index{0});
    CHECK(sorted == all);

    seen.clear();
    std::vector<double> no_a(30, 1.0);
    for (int i = 0; i < 10; ++i) no_a[static_cast<std::size_t>(i)] = 0.0;
    trainer.run_epoch(no_a);
    CHECK(seen.size() == 30);
    for (Index i : seen) CHECK(y[static_cast<std::size_t>(i)] != 0);

    CHECK_THROWS_AS(trainer.run_epoch(std::vector<double>{1.0, 2.0}), ShapeError);
}

TEST_CASE("separable data reaches full training accuracy") {
    std::vector<int> y;
    const Matrix X = separable(50, y, 2);
    auto model = ClassifierModel::create(2, std::vector<Index>{16}, {"A", "B", "C"}, 3);
    ClassifierTrainConfig cfg;
    cfg.epochs = 100;
    cfg.seed = 4;
    const auto r = train_classifier(model, X, y, cfg);
    REQUIRE_FALSE(r.aborted);
    const auto ev = evaluate(model, X, y);
    CHECK(static_cast<double>(ev.confusion.trace()) / static_cast<double>(ev.confusion.sum()) >= 0.99);
}

TEST_CASE("confusion matrices") {
    const std::vector<int> truth{0, 1, 2, 2, 1};
    std::vector<Prediction> perfect, constant, mixed;
    for (int t : truth) {
        Vector p = Vector::Zero(3);
        p(t) = 1.0;
        perfect.push_back(make_prediction(p));
        constant.push_back(make_prediction((Vector(3) << 0, 0, 1).finished()));
    }
    const auto a = confusion_matrix(truth, perfect, 3);
    CHECK(a.sum() == a.trace());
    CHECK(a.trace() == 5);
    const auto b = confusion_matrix(truth, constant, 3);
    CHECK(b.col(2).sum() == 5);
    CHECK(b.leftCols(2).sum() == 0);

    const std::vector<int> pred{0, 2, 2, 1, 1};
    for (int p : pred) {
        Vector v = Vector::Zero(3);
        v(p) = 1.0;
        mixed.push_back(make_prediction(v));
    }
    const auto c = confusion_matrix(truth, mixed, 3);
    ConfusionMatrix tally = ConfusionMatrix::Zero(3, 3);
    for (std::size_t i = 0; i < truth.size(); ++i) tally(truth[i], pred[i]) += 1;
    CHECK(c == tally);
    CHECK_THROWS_AS(confusion_matrix(truth, std::vector<Prediction>(2), 3), ShapeError);
}

TEST_CASE("prediction csv") {
    test::TempDir dir("pred");
    const std::vector<Prediction> preds{make_prediction((Vector(2) << 0.25, 0.75).finished(), "h1")};
    const std::vector<int> truth{0};
    const std::vector<std::string> vocab{"Benign", "Ryuk"};
    write_prediction_csv(dir / "p.csv", preds, truth, vocab);
    const auto text = test::read_text(dir / "p.csv");
    CHECK(text.rfind("sample_hash,true_family,predicted_family,confidence,p_0,p_1\n", 0) == 0);
    CHECK(text.find("h1,Benign,Ryuk,0.75,0.25,0.75") != std::string::npos);
}

}  // TEST_SUITE

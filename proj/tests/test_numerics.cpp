#include <doctest.h>

#include "grad_suite.hpp"
#include "mmra/numerics.hpp"
#include "mmra/param_io.hpp"

#include <cmath>
#include <sstream>

using namespace mmra;
using doctest::Approx;

TEST_SUITE("numerics") {

TEST_CASE("identity linear layer passes its input through") {
    Layer l;
    l.W = Matrix::Identity(3, 3);
    l.b = Vector::Zero(3);
    const Stack s{l};
    const Vector x = (Vector(3) << 1.5, -2.0, 0.25).finished();
    CHECK(forward_stack(s, x) == x);
}

TEST_CASE("relu clamps negatives") {
    Layer l;
    l.W = Matrix::Identity(3, 3);
    l.b = Vector::Zero(3);
    l.activation = Activation::relu;
    const Vector y = forward_stack(Stack{l}, Vector((Vector(3) << -1, 2, 0).finished()));
    CHECK(y == (Vector(3) << 0, 2, 0).finished());
}

TEST_CASE("two-layer net matches a hand evaluation") {
    Layer a, b;
    a.W.resize(2, 3);
    a.W << 1, -1, 0.5, 0, 2, -1;
    a.b = (Vector(2) << 0.5, -1).finished();
    a.activation = Activation::relu;
    b.W.resize(1, 2);
    b.W << 2, -3;
    b.b = (Vector(1) << 0.25).finished();
    // x = (1, 2, 3): h = relu(1 - 2 + 1.5 + 0.5, 4 - 3 - 1) = (1, 0); y = 2 + 0.25
    const Vector y = forward_stack(Stack{a, b}, Vector((Vector(3) << 1, 2, 3).finished()));
    CHECK(y(0) == Approx(2.25));
}

TEST_CASE("shape mismatches are reported") {
    std::mt19937_64 rng(1);
    const std::vector<Index> dims{3, 2};
    auto s = make_stack<double>(dims, Activation::linear, rng);
    CHECK_THROWS_AS(forward_stack(s, Matrix(Matrix::Zero(4, 1))), ShapeError);
    s[0].b = Vector::Zero(5);
    CHECK_THROWS_AS(check_stack_shapes(s), ShapeError);
}

TEST_CASE("softmax") {
    const Vector u = softmax<double>(Vector::Zero(3));
    for (Index i = 0; i < 3; ++i) CHECK(u(i) == Approx(1.0 / 3.0));
    const Vector z = (Vector(3) << std::log(1.0), std::log(2.0), std::log(3.0)).finished();
    const Vector p = softmax<double>(z);
    CHECK(p(0) == Approx(1.0 / 6.0));
    CHECK(p(1) == Approx(2.0 / 6.0));
    CHECK(p(2) == Approx(3.0 / 6.0));
    const Vector shifted = softmax<double>(Vector(z.array() + 100.0));
    CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-15);
    const Vector big = softmax<double>((Vector(2) << 1000.0, 0.0).finished());
    CHECK(big.allFinite());
    CHECK(big(0) == Approx(1.0));
}

TEST_CASE("weighted cross entropy") {
    const std::vector<double> w1{1.0, 1.0}, w2{2.0, 1.0};
    CHECK(weighted_cross_entropy<double>((Vector(2) << 1.0, 0.0).finished(), 0, w2) == Approx(0.0));
    CHECK(weighted_cross_entropy<double>((Vector(2) << std::exp(-1.0), 1 - std::exp(-1.0)).finished(), 0, w1) ==
          Approx(1.0));
    CHECK(weighted_cross_entropy<double>((Vector(2) << 0.25, 0.75).finished(), 0, w2) == Approx(2.0 * std::log(4.0)));
    CHECK(std::isfinite(weighted_cross_entropy<double>((Vector(2) << 0.0, 1.0).finished(), 0, w1)));
}

TEST_CASE("backward pass") {
    std::mt19937_64 rng(3);
    const std::vector<Index> dims{3, 4, 2};
    const auto s = make_stack<double>(dims, Activation::linear, rng);
    const Matrix X = test::random_matrix(3, 5, rng);
    StackCache<double> cache;
    forward_stack(s, X, &cache);
    const auto zero = backward_stack(s, cache, Matrix(Matrix::Zero(2, 5)));
    for (const auto& w : zero.dW) CHECK(w.isZero());
    for (const auto& b : zero.db) CHECK(b.isZero());

    // Single linear layer, loss ||Wx + b - t||^2 gives dW = 2 (Wx + b - t) x^T.
    const auto lin = make_stack<double>(std::vector<Index>{3, 2}, Activation::linear, rng);
    const Vector x = (Vector(3) << 1, -2, 0.5).finished();
    const Vector t = (Vector(2) << 0.3, -0.7).finished();
    StackCache<double> c2;
    const Vector y = forward_stack(lin, x, &c2);
    const auto g = backward_stack(lin, c2, Matrix(2.0 * (y - t)));
    const Matrix expect = 2.0 * (y - t) * x.transpose();
    CHECK((g.dW[0] - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grad_check passes, localises corruption and accepts empty models") {
    std::mt19937_64 rng(5);
    const std::vector<Index> dims{5, 4, 3};
    auto s = make_stack<double>(dims, Activation::linear, rng);
    const Matrix X = test::random_matrix(5, 4, rng);
    const Matrix T = test::random_matrix(3, 4, rng);
    nudge_off_kinks(s, X, 1e-3);
    auto loss = [&] { return (forward_stack(s, X) - T).squaredNorm(); };
    StackCache<double> cache;
    const Matrix Y = forward_stack(s, X, &cache);
    auto g = backward_stack(s, cache, Matrix(2.0 * (Y - T)));
    const auto ok = grad_check<double>(param_views(s), gradient_views(g), loss, 1e-4);
    CHECK(ok.passed);
    CHECK(ok.checked == static_cast<std::size_t>(5 * 4 + 4 + 4 * 3 + 3));

    g.dW[1](2, 1) += 1.0;
    const auto bad = grad_check<double>(param_views(s), gradient_views(g), loss, 1e-4);
    CHECK_FALSE(bad.passed);
    CHECK(bad.worst_param == "W1");
    CHECK(bad.worst_row == 2);
    CHECK(bad.worst_col == 1);

    const auto empty = grad_check<double>({}, {}, [] { return 0.0; }, 1e-4);
    CHECK(empty.passed);
    CHECK(empty.checked == 0);
}

TEST_CASE("randomised classifier gradients") {
    const auto r = test::classifier_grad_suite(30, 17);
    CHECK(r.failures == 0);
    CHECK(r.worst < 1e-4);
}

TEST_CASE("sgd step") {
    Layer l;
    l.W = Matrix::Constant(1, 1, 1.0);
    l.b = Vector::Zero(1);
    Stack s{l};
    ParamGradients<double> g;
    g.dW = {Matrix::Constant(1, 1, 0.5)};
    g.db = {Vector::Zero(1)};
    sgd_step(s, g, 0.0, 0.0);
    CHECK(s[0].W(0, 0) == 1.0);
    sgd_step(s, g, 0.1, 0.0);
    CHECK(s[0].W(0, 0) == Approx(0.95));

    s[0].W(0, 0) = 1.0;
    g.dW[0](0, 0) = 0.0;
    sgd_step(s, g, 0.1, 0.1);
    CHECK(s[0].W(0, 0) == Approx(0.99));

    g.dW[0](0, 0) = std::nan("");
    const double before = s[0].W(0, 0);
    try {
        sgd_step(s, g, 0.1, 0.0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(e.layer == 0);
    }
    CHECK(s[0].W(0, 0) == before);
}

TEST_CASE("gradient clipping scales jointly") {
    ParamGradients<double> a, b;
    a.dW = {Matrix::Constant(1, 1, 3.0)};
    a.db = {Vector::Zero(1)};
    b.dW = {Matrix::Constant(1, 1, 4.0)};
    b.db = {Vector::Zero(1)};
    std::array<ParamGradients<double>*, 2> groups{&a, &b};
    clip_gradients<double>(groups, 10.0);
    CHECK(a.dW[0](0, 0) == 3.0);
    clip_gradients<double>(groups, 1.0);
    CHECK(a.dW[0](0, 0) == Approx(0.6));
    CHECK(b.dW[0](0, 0) == Approx(0.8));
}

TEST_CASE("parameter files round-trip bit for bit") {
    std::mt19937_64 rng(9);
    ParamFile f;
    f.meta["note"] = "two words";
    f.stacks.emplace_back("enc", make_stack<double>(std::vector<Index>{4, 3, 2}, Activation::linear, rng));
    f.stacks.back().second[0].W(0, 0) = 1.0 / 3.0;
    f.stacks.back().second[1].b(1) = -1e-300;
    std::stringstream ss;
    write_params(ss, f);
    const auto back = read_params(ss);
    CHECK(back.meta.at("note") == "two words");
    const auto& a = f.stack("enc");
    const auto& b = back.stack("enc");
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].W == b[k].W);
        CHECK(a[k].b == b[k].b);
        CHECK(a[k].activation == b[k].activation);
    }
    CHECK(parameter_checksum(a) == parameter_checksum(b));

    std::stringstream bad("mmra-params 1\nstack enc 1\nlayer relu 2 2\nW 1 2 3\n");
    CHECK_THROWS(read_params(bad));
}

TEST_CASE("checksum changes with any parameter") {
    std::mt19937_64 rng(2);
    auto s = make_stack<double>(std::vector<Index>{3, 2}, Activation::linear, rng);
    const auto before = parameter_checksum(s);
    s[0].b(1) = std::nextafter(s[0].b(1), 1.0);
    CHECK(parameter_checksum(s) != before);
}

}  // TEST_SUITE

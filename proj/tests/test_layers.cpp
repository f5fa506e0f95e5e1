#include <doctest.h>

#include <cmath>

#include "align/gradcheck.hpp"
#include "align/layers.hpp"
#include "align/rng.hpp"

using namespace align;

namespace {

Eigen::MatrixXd randm(int r, int c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.gaussian();
    return m;
}

}  // namespace

TEST_CASE("fc: forward matches the affine map") {
    Rng rng(1, 0);
    FcLayer fc("fc", 2, 3, Activation::None, rng);
    fc.weight.value << 1, 0, 0, 1, 1, 1;
    fc.bias.value << 0.5, -0.5, 0;
    Eigen::MatrixXd x(1, 2);
    x << 2.0, 3.0;
    Eigen::MatrixXd y = fc_forward(fc, x);
    CHECK(y(0, 0) == doctest::Approx(2.5));
    CHECK(y(0, 1) == doctest::Approx(2.5));
    CHECK(y(0, 2) == doctest::Approx(5.0));
}

TEST_CASE("fc: tanh and relu activations applied elementwise") {
    Rng rng(2, 0);
    FcLayer ft("t", 3, 2, Activation::Tanh, rng);
    FcLayer fr("r", 3, 2, Activation::Relu, rng);
    Eigen::MatrixXd x = randm(4, 3, rng);
    Eigen::MatrixXd yt = fc_forward(ft, x);
    for (int i = 0; i < yt.size(); ++i) CHECK(std::abs(yt.reshaped()(i)) <= 1.0);
    Eigen::MatrixXd yr = fc_forward(fr, x);
    for (int i = 0; i < yr.size(); ++i) CHECK(yr.reshaped()(i) >= 0.0);
}

TEST_CASE("fc and softmax head gradients pass finite differences") {
    for (const auto& r : run_gradcheck("fc")) {
        INFO(r.op);
        CHECK(r.worst_error < r.tolerance);
    }
    for (const auto& r : run_gradcheck("softmax_ce")) {
        INFO(r.op);
        CHECK(r.worst_error < r.tolerance);
    }
}

TEST_CASE("lstm: shapes, padding and empty input") {
    Rng rng(3, 0);
    LstmStack stack("s", 4, 6, 2, Direction::Forward, false, rng);
    Eigen::MatrixXd x = randm(5, 4, rng);
    Eigen::MatrixXd h = stack.forward(x, 3);
    CHECK(h.rows() == 5);
    CHECK(h.cols() == 6);
    CHECK(h.row(3).isZero());
    CHECK(h.row(4).isZero());
    CHECK_FALSE(h.row(2).isZero());
    CHECK(stack.forward(x, 0).isZero());
}

TEST_CASE("lstm: padding rows never influence valid outputs") {
    Rng rng(4, 0);
    LstmStack stack("s", 3, 5, 2, Direction::BackwardInTime, false, rng);
    Eigen::MatrixXd x = randm(6, 3, rng);
    Eigen::MatrixXd h1 = stack.forward(x, 4);
    Eigen::MatrixXd x2 = x;
    x2.row(4).setConstant(1e6);
    x2.row(5).setConstant(-1e6);
    Eigen::MatrixXd h2 = stack.forward(x2, 4);
    CHECK((h1 - h2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lstm: backward-in-time equals forward on the reversed sequence") {
    Rng rng(5, 0);
    Rng rng2(5, 0);  // identical init for both stacks
    LstmStack fwd("s", 3, 5, 2, Direction::Forward, false, rng);
    LstmStack bwd("s", 3, 5, 2, Direction::BackwardInTime, false, rng2);
    Eigen::MatrixXd x = randm(4, 3, rng);
    Eigen::MatrixXd xr = x.colwise().reverse();
    Eigen::MatrixXd hb = bwd.forward(x, 4);
    Eigen::MatrixXd hf = fwd.forward(xr, 4);
    CHECK((hb - hf.colwise().reverse()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("lstm: forget gate bias initialized to one") {
    Rng rng(6, 0);
    LstmStack stack("s", 3, 4, 1, Direction::Forward, false, rng);
    const Eigen::MatrixXd& b = stack.layers()[0].b.value;
    for (int i = 4; i < 8; ++i) CHECK(b(i, 0) == 1.0);
}

TEST_CASE("lstm gradients pass finite differences (both directions, ln variant)") {
    for (const auto& r : run_gradcheck("lstm")) {
        INFO(r.op);
        CHECK(r.worst_error < r.tolerance);
    }
    for (const auto& r : run_gradcheck("ln_lstm")) {
        INFO(r.op);
        CHECK(r.worst_error < r.tolerance);
    }
}

TEST_CASE("dropout: identity at rate zero or eval, inverted scaling otherwise") {
    Rng rng(7, 0);
    Eigen::MatrixXd x = randm(20, 10, rng);
    CHECK((dropout_forward(x, 0.0, true, rng) - x).isZero());
    CHECK((dropout_forward(x, 0.5, false, rng) - x).isZero());
    Eigen::MatrixXd mask;
    Eigen::MatrixXd y = dropout_forward(x, 0.5, true, rng, &mask);
    for (int i = 0; i < y.size(); ++i) {
        double v = y.reshaped()(i), orig = x.reshaped()(i);
        bool kept = std::abs(v - 2.0 * orig) < 1e-12;
        bool dropped = v == 0.0;
        CHECK((kept || dropped));
    }
}

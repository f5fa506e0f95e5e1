#include <doctest.h>

#include <cmath>
#include <set>

#include "align/errors.hpp"
#include "align/param.hpp"
#include "align/rng.hpp"
#include "align/sequence.hpp"

using namespace align;

TEST_CASE("rng: identical keys give identical sequences") {
    Rng a(123, 4), b(123, 4);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("rng: different streams differ") {
    Rng a(123, 0), b(123, 1);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("rng: split is independent of parent draw position") {
    Rng a(9, 0);
    Rng child_before = a.split(5);
    for (int i = 0; i < 10; ++i) a.next_u64();
    Rng child_after = a.split(5);
    for (int i = 0; i < 20; ++i) CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("rng: uniform range and moments") {
    Rng rng(7, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
    double v = rng.uniform(-3.0, 5.0);
    CHECK(v >= -3.0);
    CHECK(v < 5.0);
}

TEST_CASE("rng: gaussian moments") {
    Rng rng(11, 2);
    double sum = 0.0, sq = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        double g = rng.gaussian();
        sum += g;
        sq += g * g;
    }
    double mean = sum / n;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(sq / n - mean * mean - 1.0) < 0.03);
}

TEST_CASE("rng: categorical respects probabilities and validates input") {
    Rng rng(3, 0);
    Eigen::VectorXd p(3);
    p << 0.2, 0.5, 0.3;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(3);
    const int n = 30000;
    for (int i = 0; i < n; ++i) counts(rng.categorical(p)) += 1.0;
    for (int k = 0; k < 3; ++k) CHECK(std::abs(counts(k) / n - p(k)) < 0.02);

    Eigen::VectorXd bad(2);
    bad << 0.6, 0.6;
    CHECK_THROWS_AS(rng.categorical(bad), ParameterError);
    bad << -0.1, 1.1;
    CHECK_THROWS_AS(rng.categorical(bad), ParameterError);
}

TEST_CASE("param: buffers start zeroed and shaped") {
    ParamTensor p("w", 3, 4);
    CHECK(p.rows() == 3);
    CHECK(p.cols() == 4);
    CHECK(p.value.isZero());
    CHECK(p.grad.isZero());
    CHECK(p.adam_m.isZero());
    CHECK(p.adam_v.isZero());
    CHECK(p.lars_enabled);
    ParamTensor b("b", 3, 1, false);
    CHECK_FALSE(b.lars_enabled);
}

TEST_CASE("param: global norm over fields") {
    ParamTensor a("a", 1, 2), b("b", 2, 1);
    a.value << 3.0, 0.0;
    b.value << 0.0, 4.0;
    a.grad << 1.0, 2.0;
    b.grad << 2.0, 4.0;
    std::vector<ParamTensor*> ps = {&a, &b};
    CHECK(global_norm(ps, ParamField::Value) == doctest::Approx(5.0));
    CHECK(global_norm(ps, ParamField::Grad) == doctest::Approx(5.0));
    CHECK(global_norm({}, ParamField::Grad) == 0.0);
}

TEST_CASE("sequence batch: padding accounting") {
    SequenceBatch b;
    b.features.push_back(Eigen::MatrixXd::Ones(5, 3));
    b.features.push_back(Eigen::MatrixXd::Ones(5, 3));
    b.lengths = {5, 2};
    CHECK(b.batch() == 2);
    CHECK(b.steps() == 5);
    CHECK(b.dim() == 3);
    CHECK(b.unpadded_count() == 7);
    CHECK(b.valid(1, 1));
    CHECK_FALSE(b.valid(1, 2));
    SequenceBatch z = SequenceBatch::zeros_like(b);
    CHECK(z.features[0].isZero());
    CHECK(z.lengths == b.lengths);
}

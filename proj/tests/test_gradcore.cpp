#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#define DOCTEST_CONFIG_SUPER_FAST_ASSERTS
#include <doctest.h>

#include <cmath>
#include <vector>

#include "svit/tensor.hpp"
#include "test_util.hpp"

using namespace svit;

TEST_CASE("softmax rows: two-entry oracle and row normalization") {
    Graph g;
    const std::vector<double> x = {0.0, std::log(3.0)};
    Tensor y = softmax_rows(g, g.input(1, 2, x));
    CHECK(y.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(y.values()[1] == doctest::Approx(0.75).epsilon(1e-12));

    Tensor r = softmax_rows(g, g.input(3, 5, tu::randn(15, 7)));
    for (std::size_t i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            const double v = r.values()[i * 5 + j];
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("softmax rows: NaN input raises NumericError") {
    Graph g;
    std::vector<double> x = {1.0, std::nan(""), 0.0};
    CHECK_THROWS_AS(softmax_rows(g, g.input(1, 3, x)), NumericError);
}

TEST_CASE("matmul: forward oracle and exact multiply accounting") {
    Graph g;
    const std::vector<double> a = {1, 2, 3, 4, 5, 6};        // 2x3
    const std::vector<double> b = {7, 8, 9, 10, 11, 12};     // 3x2
    Tensor y = matmul(g, g.input(2, 3, a), g.input(3, 2, b));
    const std::vector<double> want = {58, 64, 139, 154};
    for (std::size_t i = 0; i < 4; ++i) CHECK(y.values()[i] == doctest::Approx(want[i]));

    multiply_count_reset();
    multiply_count_enable(true);
    matmul(g, g.input(3, 4, tu::randn(12, 1)), g.input(4, 5, tu::randn(20, 2)));
    multiply_count_enable(false);
    CHECK(multiply_count() == 3u * 4u * 5u);
}

TEST_CASE("shape mismatches raise DimensionError naming both operands") {
    Graph g;
    Tensor a = g.input(2, 3, tu::randn(6, 3));
    Tensor b = g.input(2, 3, tu::randn(6, 4));
    Tensor c = g.input(3, 2, tu::randn(6, 5));
    CHECK_THROWS_AS(matmul(g, a, b), DimensionError);
    CHECK_THROWS_AS(add(g, a, c), DimensionError);
    CHECK_THROWS_AS(mul(g, a, c), DimensionError);
    CHECK_THROWS_AS(add_rowvec(g, a, g.input(1, 2, tu::randn(2, 6))), DimensionError);
    CHECK_THROWS_AS(slice_cols(g, a, 2, 2), DimensionError);
    CHECK_THROWS_AS(layer_norm(g, a, g.input(1, 2, tu::randn(2, 7)),
                               g.input(1, 3, tu::randn(3, 8))),
                    DimensionError);
    CHECK_THROWS_AS(a.value(), DimensionError);  // value() needs 1x1
}

TEST_CASE("binary cross-entropy: stable closed-form values") {
    Graph g;
    auto bce = [&](double z, int y) { return bce_with_logits(g, g.input(1, 1, {&z, 1}), y).value(); };
    CHECK(bce(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(bce(0.0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(bce(20.0, 1) == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));
    CHECK(bce(-20.0, 0) == doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));
    CHECK(bce(500.0, 0) == doctest::Approx(500.0));  // no overflow
    CHECK(std::isfinite(bce(-745.0, 1)));
}

TEST_CASE("focal loss: hand value and the gamma=0 alpha=0.5 anchor") {
    Graph g;
    const double z0 = 0.0;
    Tensor f = focal_with_logits(g, g.input(1, 1, {&z0, 1}), 1, 2.0, 0.25);
    // p = 1/2: loss = -alpha (1-p)^gamma log p = 0.25 * 0.25 * ln 2.
    CHECK(f.value() == doctest::Approx(0.0625 * std::log(2.0)).epsilon(1e-12));

    for (double z : {-3.0, -0.7, 0.0, 1.2, 4.0}) {
        for (int y : {0, 1}) {
            const double fv = focal_with_logits(g, g.input(1, 1, {&z, 1}), y, 0.0, 0.5).value();
            const double bv = bce_with_logits(g, g.input(1, 1, {&z, 1}), y).value();
            CHECK(fv == doctest::Approx(0.5 * bv).epsilon(1e-12));
        }
    }
}

TEST_CASE("elementwise and reduction forward oracles") {
    Graph g;
    const std::vector<double> x = {1, 2, 3, 4};
    CHECK(gelu(g, g.input(1, 1, std::vector<double>{0.0})).values()[0] == doctest::Approx(0.0));
    // tanh-approximation formula, spelled out.
    const double z = 1.3;
    const double k = std::sqrt(2.0 / 3.14159265358979323846);
    const double want_gelu = 0.5 * z * (1.0 + std::tanh(k * (z + 0.044715 * z * z * z)));
    CHECK(gelu(g, g.input(1, 1, {&z, 1})).values()[0] == doctest::Approx(want_gelu).epsilon(1e-12));

    Tensor mr = mean_rows(g, g.input(2, 2, x));
    CHECK(mr.rows() == 1);
    CHECK(mr.values()[0] == doctest::Approx(2.0));
    CHECK(mr.values()[1] == doctest::Approx(3.0));

    CHECK(sum_all(g, g.input(2, 2, x)).value() == doctest::Approx(10.0));
    Tensor sc = scale(g, g.input(2, 2, x), -0.5);
    CHECK(sc.values()[2] == doctest::Approx(-1.5));

    const std::vector<double> u = {2.0, -1.0};
    Tensor sr = scale_rows(g, g.input(2, 2, x), u);
    CHECK(sr.values()[0] == doctest::Approx(2.0));
    CHECK(sr.values()[1] == doctest::Approx(4.0));
    CHECK(sr.values()[2] == doctest::Approx(-3.0));
    CHECK(sr.values()[3] == doctest::Approx(-4.0));
}

TEST_CASE("layer norm: normalized statistics under unit gain and zero shift") {
    Graph g;
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> gamma = {1, 1, 1, 1}, beta = {0, 0, 0, 0};
    Tensor y = layer_norm(g, g.input(1, 4, x), g.input(1, 4, gamma), g.input(1, 4, beta));
    // mean 2.5, population variance 1.25, eps 1e-5.
    const double denom = std::sqrt(1.25 + 1e-5);
    for (std::size_t j = 0; j < 4; ++j)
        CHECK(y.values()[j] == doctest::Approx((x[j] - 2.5) / denom).epsilon(1e-12));
}

TEST_CASE("slice and concat columns reassemble the original") {
    Graph g;
    const std::vector<double> x = tu::randn(3 * 7, 11);
    Tensor a = g.input(3, 7, x);
    Tensor parts[3] = {slice_cols(g, a, 0, 2), slice_cols(g, a, 2, 4), slice_cols(g, a, 6, 1)};
    Tensor back = concat_cols(g, parts);
    REQUIRE(back.rows() == 3);
    REQUIRE(back.cols() == 7);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(back.values()[i] == x[i]);
}

TEST_CASE("backward: hand-checked chain and gradient accumulation") {
    // f = sum(x * x) -> df/dx = 2x.
    Graph g;
    const std::vector<double> x0 = {1.5, -2.0, 0.5};
    Tensor x = g.leaf(1, 3, x0);
    g.backward(sum_all(g, mul(g, x, x)));
    for (std::size_t j = 0; j < 3; ++j)
        CHECK(x.grad()[j] == doctest::Approx(2.0 * x0[j]).epsilon(1e-12));

    // Persistent parameters accumulate across backward calls until zeroed.
    Param p("p", 1, 2, {1.0, 2.0});
    Graph g2;
    g2.backward(sum_all(g2, mul(g2, p.tensor(), p.tensor())));
    g2.reset();
    g2.backward(sum_all(g2, mul(g2, p.tensor(), p.tensor())));
    CHECK(p.grad()[0] == doctest::Approx(4.0));
    CHECK(p.grad()[1] == doctest::Approx(8.0));
    p.zero_grad();
    CHECK(p.grad()[0] == 0.0);
}

TEST_CASE("graph reset: arena reuse keeps node counts stable") {
    Graph g;
    std::size_t first = 0;
    for (int round = 0; round < 3; ++round) {
        Tensor a = g.input(4, 4, tu::randn(16, 21));
        Tensor b = g.input(4, 4, tu::randn(16, 22));
        g.backward(sum_all(g, gelu(g, matmul(g, a, b))));
        if (round == 0)
            first = g.node_count();
        else
            CHECK(g.node_count() == first);
        g.reset();
    }
    CHECK(g.node_count() == 0);
}

TEST_CASE("grad_check: accepts correct composite gradients") {
    const std::vector<double> x0 = tu::randn(12, 31, 0.8);
    const double err = grad_check(
        [](Graph& g, const Tensor& x) {
            Tensor w = g.input(4, 3, tu::randn(12, 32));
            Tensor h = gelu(g, matmul(g, x, w));   // 3x3
            Tensor s = softmax_rows(g, h);
            return sum_all(g, mul(g, s, h));
        },
        3, 4, x0);
    CHECK(err < 1e-6);
}

TEST_CASE("grad_check: detects dependence hidden from the tape") {
    // The builder copies the current leaf values into a constant input, so the
    // analytic gradient sees x*c while the numeric probe sees x*x. The metric
    // must report the ~0.5 relative error instead of silently passing.
    const std::vector<double> x0 = tu::randn(6, 41, 1.0);
    const double err = grad_check(
        [](Graph& g, const Tensor& x) {
            Tensor hidden = g.input(x.rows(), x.cols(), x.values());
            return sum_all(g, mul(g, x, hidden));
        },
        2, 3, x0);
    CHECK(err > 0.2);
}

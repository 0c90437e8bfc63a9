#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gatgan/errors.hpp"
#include "gatgan/gradcheck.hpp"
#include "gatgan/rng.hpp"
#include "gatgan/tensor.hpp"

using namespace gatgan;

namespace {

// Random values bounded away from 0 so leaky_relu kinks are never sampled.
Tensor jittered(Shape shape, Rng& rng, double lo = 0.1, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values_mut()) {
        v = rng.uniform(lo, hi) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
    }
    return t;
}

}  // namespace

TEST_CASE("rng is deterministic per seed and stream") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(a.uniform() != c.uniform());

    Rng s1 = a.stream(1), s2 = a.stream(2), s1b = a.stream(1);
    CHECK(s1.raw() != s2.raw());
    Rng s1c = a.stream(1);
    CHECK(s1b.raw() == s1c.raw());

    Rng d(7);
    d.normal();
    d.uniform();
    const std::string snap = d.state();
    Rng e(0);
    e.set_state(snap);
    for (int i = 0; i < 50; ++i) CHECK(d.normal() == e.normal());

    Rng f(5);
    for (int i = 0; i < 1000; ++i) {
        const auto v = f.below(13);
        CHECK(v < 13);
    }
    CHECK_THROWS_AS(f.below(0), ContractError);
    CHECK_THROWS_AS(Rng(1).set_state("garbage"), ParseError);
}

TEST_CASE("tensor construction and element access") {
    Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rank() == 2);
    CHECK(t.size() == 6);
    CHECK(t.at({1, 2}) == 6.0);
    t.set({0, 1}, 9.0);
    CHECK(t.at({0, 1}) == 9.0);
    CHECK(Tensor::scalar(3.5).item() == 3.5);
    CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), DimensionError);
    CHECK_THROWS_AS(t.item(), ContractError);
    CHECK_THROWS_AS(t.at({5, 0}), DimensionError);

    Tensor shared = t;  // handles share storage
    shared.set({0, 0}, -1.0);
    CHECK(t.at({0, 0}) == -1.0);
    Tensor copy = t.detached();
    copy.set({0, 0}, 8.0);
    CHECK(t.at({0, 0}) == -1.0);
}

TEST_CASE("matmul identity and hand oracle") {
    Tensor I({2, 2}, {1, 0, 0, 1});
    Tensor A({2, 2}, {1, 2, 3, 4});
    Tensor P = matmul(I, A);
    for (std::size_t i = 0; i < 4; ++i) CHECK(P.values()[i] == A.values()[i]);

    Tensor row({1, 2}, {1, 2});
    Tensor col({2, 1}, {3, 4});
    CHECK(matmul(row, col).item() == doctest::Approx(11.0).epsilon(1e-15));

    CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
    try {
        matmul(Tensor({2, 3}), Tensor({4, 5}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2,3]") != std::string::npos);
        CHECK(msg.find("[4,5]") != std::string::npos);
    }
}

TEST_CASE("matmul batches and rank-2 sharing") {
    Rng rng(11);
    Tensor a = Tensor::uniform({3, 2, 4}, rng);
    Tensor w = Tensor::uniform({4, 5}, rng);
    Tensor y = matmul(a, w);
    REQUIRE(y.shape() == Shape{3, 2, 5});
    // Batch 1 equals the rank-2 product of its slice.
    Tensor a1({2, 4}, std::vector<double>(a.values().begin() + 8, a.values().begin() + 16));
    Tensor y1 = matmul(a1, w);
    for (std::size_t i = 0; i < y1.size(); ++i) {
        CHECK(y.values()[10 + i] == doctest::Approx(y1.values()[i]).epsilon(1e-15));
    }

    Tensor b = Tensor::uniform({3, 5, 4}, rng);
    CHECK(matmul(a, transpose_last2(b)).shape() == Shape{3, 2, 5});
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(3);
    Tensor B = jittered({3, 2}, rng);
    const double err = grad_check(
        [&](const Tensor& A) { return sum(matmul(A, B)); }, jittered({2, 3}, rng));
    CHECK(err < 1e-6);
    Tensor A = jittered({2, 3}, rng);
    const double errb = grad_check(
        [&](const Tensor& Bv) { return sum(matmul(A, Bv)); }, jittered({3, 2}, rng));
    CHECK(errb < 1e-6);
    const double errbatch = grad_check(
        [&](const Tensor& X) { return mean(matmul(X, B)); }, jittered({4, 2, 3}, rng));
    CHECK(errbatch < 1e-6);
}

TEST_CASE("elementwise ops broadcast and differentiate") {
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3}, {10, 20, 30});
    Tensor s = add(a, b);
    CHECK(s.shape() == Shape{2, 3});
    CHECK(s.at({1, 0}) == 14.0);
    Tensor col({2, 1}, {1, 2});
    Tensor p = mul(a, col);
    CHECK(p.at({1, 2}) == 12.0);
    CHECK_THROWS_AS(add(Tensor({2, 3}), Tensor({2, 2})), DimensionError);

    Rng rng(5);
    Tensor other = jittered({2, 3}, rng);
    for (auto op : {add, sub, mul}) {
        const double err = grad_check(
            [&](const Tensor& x) { return sum(op(x, other)); }, jittered({2, 3}, rng));
        CHECK(err < 1e-6);
    }
    Tensor denom = jittered({3}, rng, 0.5, 1.0);
    const double derr = grad_check(
        [&](const Tensor& x) { return sum(div(x, denom)); }, jittered({2, 3}, rng));
    CHECK(derr < 1e-6);
    const double derr2 = grad_check(
        [&](const Tensor& x) { return sum(div(other, x)); }, jittered({3}, rng, 0.5, 1.0));
    CHECK(derr2 < 1e-5);
    const double berr = grad_check(
        [&](const Tensor& x) { return sum(mul(a, x)); }, jittered({3}, rng));
    CHECK(berr < 1e-6);
    const double serr = grad_check(
        [&](const Tensor& x) { return sum(add_scalar(mul_scalar(x, 3.0), 1.0)); },
        jittered({2, 2}, rng));
    CHECK(serr < 1e-6);
}

TEST_CASE("conv1d identity kernel and sliding oracle") {
    Rng rng(9);
    Tensor x = Tensor::uniform({2, 5, 3}, rng);
    Tensor ident({1, 3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor y = conv1d(x, ident, Padding::same);
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-15));
    }

    Tensor seq({1, 3, 1}, {1, 2, 3});
    Tensor ker({2, 1, 1}, {1, 1});
    Tensor out = conv1d(seq, ker, Padding::valid);
    REQUIRE(out.shape() == Shape{1, 2, 1});
    CHECK(out.values()[0] == 3.0);
    CHECK(out.values()[1] == 5.0);

    Tensor same = conv1d(seq, ker, Padding::same);
    REQUIRE(same.shape() == Shape{1, 3, 1});
    CHECK(same.values()[0] == 1.0);  // left zero pad: 0*1 + 1*1

    CHECK_THROWS_AS(conv1d(seq, Tensor({4, 1, 1}), Padding::valid), DimensionError);
    CHECK_THROWS_AS(conv1d(seq, Tensor({2, 2, 1}), Padding::same), DimensionError);
}

TEST_CASE("conv1d gradient matches finite differences") {
    Rng rng(21);
    Tensor ker = jittered({3, 2, 4}, rng);
    const double ex = grad_check(
        [&](const Tensor& x) { return mean(conv1d(x, ker, Padding::same)); },
        jittered({2, 6, 2}, rng));
    CHECK(ex < 1e-5);
    Tensor x = jittered({2, 6, 2}, rng);
    const double ek = grad_check(
        [&](const Tensor& k) { return mean(conv1d(x, k, Padding::valid)); },
        jittered({3, 2, 4}, rng));
    CHECK(ek < 1e-5);
}

TEST_CASE("activation definitions") {
    Tensor x({3}, {-1.0, 0.0, 2.0});
    Tensor lr = leaky_relu(x, 0.2);
    CHECK(lr.values()[0] == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(lr.values()[2] == 2.0);
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    CHECK(tanh_act(Tensor::scalar(0.0)).item() == 0.0);
    CHECK(sigmoid(Tensor::scalar(500.0)).item() == doctest::Approx(1.0));
    CHECK(sigmoid(Tensor::scalar(-500.0)).item() == doctest::Approx(0.0));
    CHECK_THROWS_AS(leaky_relu(x, 0.0), ContractError);
    CHECK_THROWS_AS(leaky_relu(x, 1.5), ContractError);

    Rng rng(13);
    for (auto kind : {Activation::leaky_relu, Activation::sigmoid, Activation::tanh}) {
        const double err = grad_check(
            [&](const Tensor& v) { return sum(activation(v, kind)); }, jittered({2, 4}, rng));
        CHECK(err < 1e-5);
    }
}

TEST_CASE("softmax_last values, normalization, gradient") {
    Tensor flat = softmax_last(Tensor({3}, {0, 0, 0}));
    for (double v : flat.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Tensor logw = softmax_last(Tensor({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}));
    CHECK(logw.values()[0] == doctest::Approx(1.0 / 6).epsilon(1e-13));
    CHECK(logw.values()[1] == doctest::Approx(2.0 / 6).epsilon(1e-13));
    CHECK(logw.values()[2] == doctest::Approx(3.0 / 6).epsilon(1e-13));

    Rng rng(17);
    Tensor r = Tensor::uniform({4, 5, 6}, rng, -30.0, 30.0);
    Tensor sm = softmax_last(r);
    for (std::size_t row = 0; row < 20; ++row) {
        double s = 0.0;
        for (std::size_t i = 0; i < 6; ++i) {
            const double v = sm.values()[row * 6 + i];
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }

    Tensor w = jittered({4}, rng);
    const double err = grad_check(
        [&](const Tensor& x) { return sum(mul(softmax_last(x), w)); }, jittered({2, 4}, rng));
    CHECK(err < 1e-5);
}

TEST_CASE("reduce sum and mean with axes") {
    CHECK(mean(Tensor({3}, {1, 2, 3})).item() == 2.0);
    CHECK(sum(Tensor::zeros({2, 4})).item() == 0.0);

    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor colsum = reduce(x, Reduce::sum, {0}, false);
    REQUIRE(colsum.shape() == Shape{3});
    CHECK(colsum.values()[0] == 5.0);
    CHECK(colsum.values()[2] == 9.0);
    Tensor rowmean = reduce(x, Reduce::mean, {1}, true);
    REQUIRE(rowmean.shape() == Shape{2, 1});
    CHECK(rowmean.values()[0] == 2.0);
    CHECK(rowmean.values()[1] == 5.0);
    CHECK_THROWS_AS(reduce(x, Reduce::sum, {7}, false), DimensionError);

    Rng rng(19);
    const double err = grad_check(
        [&](const Tensor& v) { return mean(v); }, jittered({3, 4}, rng));
    CHECK(err < 1e-6);
    Tensor w = jittered({2, 1, 4}, rng);
    const double err2 = grad_check(
        [&](const Tensor& v) { return sum(mul(reduce(v, Reduce::mean, {1}, true), w)); },
        jittered({2, 3, 4}, rng));
    CHECK(err2 < 1e-5);
}

TEST_CASE("concat_last values and backward split") {
    Tensor joined = concat_last(Tensor({1}, {1}), Tensor({1}, {2}));
    REQUIRE(joined.shape() == Shape{2});
    CHECK(joined.values()[0] == 1.0);
    CHECK(joined.values()[1] == 2.0);

    CHECK(concat_last(Tensor({2, 3}), Tensor({2, 5})).shape() == Shape{2, 8});
    CHECK_THROWS_AS(concat_last(Tensor({2, 3}), Tensor({3, 3})), DimensionError);

    Rng rng(23);
    Tensor right = jittered({2, 3}, rng);
    Tensor w = jittered({2, 5}, rng);
    const double err = grad_check(
        [&](const Tensor& left) { return sum(mul(concat_last(left, right), w)); },
        jittered({2, 2}, rng));
    CHECK(err < 1e-6);
    Tensor left = jittered({2, 2}, rng);
    const double err2 = grad_check(
        [&](const Tensor& r) { return sum(mul(concat_last(left, r), w)); },
        jittered({2, 3}, rng));
    CHECK(err2 < 1e-6);
}

TEST_CASE("avg_pool1d values and gradient") {
    Rng rng(29);
    Tensor x = Tensor::uniform({2, 5, 3}, rng);
    Tensor same_as_x = avg_pool1d(x, 1, 1, Padding::valid);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(same_as_x.values()[i] == x.values()[i]);

    Tensor pair({1, 2, 1}, {1, 3});
    CHECK(avg_pool1d(pair, 2, 1, Padding::valid).item() == 2.0);

    // "same" with window=2 stride=1 preserves the time axis. Padding is
    // left-biased, so window t covers samples {t-1, t}; the edge window
    // averages only its in-bounds sample.
    Tensor seq({1, 3, 1}, {1, 2, 3});
    Tensor pooled = avg_pool1d(seq, 2, 1, Padding::same);
    REQUIRE(pooled.shape() == Shape{1, 3, 1});
    CHECK(pooled.values()[0] == doctest::Approx(1.0));
    CHECK(pooled.values()[1] == doctest::Approx(1.5));
    CHECK(pooled.values()[2] == doctest::Approx(2.5));

    CHECK_THROWS_AS(avg_pool1d(seq, 4, 1, Padding::valid), DimensionError);

    const double err = grad_check(
        [&](const Tensor& v) { return sum(avg_pool1d(v, 2, 2, Padding::same)); },
        jittered({2, 5, 3}, rng));
    CHECK(err < 1e-6);
    const double err2 = grad_check(
        [&](const Tensor& v) { return mean(avg_pool1d(v, 3, 1, Padding::valid)); },
        jittered({1, 6, 2}, rng));
    CHECK(err2 < 1e-6);
}

TEST_CASE("structural ops round-trip and differentiate") {
    Rng rng(31);
    Tensor x = Tensor::uniform({2, 3, 4}, rng);
    Tensor t = transpose_last2(x);
    REQUIRE(t.shape() == Shape{2, 4, 3});
    CHECK(t.at({1, 2, 0}) == x.at({1, 0, 2}));
    Tensor tt = transpose_last2(t);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(tt.values()[i] == x.values()[i]);

    Tensor r = reshape(x, {6, 4});
    CHECK(r.at({5, 3}) == x.at({1, 2, 3}));
    CHECK_THROWS_AS(reshape(x, {5, 5}), DimensionError);

    Tensor sl = slice_axis(x, 1, 1, 2);
    REQUIRE(sl.shape() == Shape{2, 2, 4});
    CHECK(sl.at({0, 0, 0}) == x.at({0, 1, 0}));
    CHECK_THROWS_AS(slice_axis(x, 1, 2, 5), DimensionError);

    Tensor rep = repeat_axis(slice_axis(x, 1, 0, 1), 1, 3);
    REQUIRE(rep.shape() == Shape{2, 3, 4});
    CHECK(rep.at({0, 2, 1}) == x.at({0, 0, 1}));
    CHECK_THROWS_AS(repeat_axis(x, 1, 3), DimensionError);

    Tensor w = jittered({2, 4, 3}, rng);
    const double e1 = grad_check(
        [&](const Tensor& v) { return sum(mul(transpose_last2(v), w)); }, jittered({2, 3, 4}, rng));
    CHECK(e1 < 1e-6);
    Tensor w2 = jittered({6, 4}, rng);
    const double e2 = grad_check(
        [&](const Tensor& v) { return sum(mul(reshape(v, {6, 4}), w2)); }, jittered({2, 3, 4}, rng));
    CHECK(e2 < 1e-6);
    Tensor w3 = jittered({2, 2, 4}, rng);
    const double e3 = grad_check(
        [&](const Tensor& v) { return sum(mul(slice_axis(v, 1, 1, 2), w3)); },
        jittered({2, 3, 4}, rng));
    CHECK(e3 < 1e-6);
    Tensor w4 = jittered({2, 3, 4}, rng);
    const double e4 = grad_check(
        [&](const Tensor& v) { return sum(mul(repeat_axis(v, 1, 3), w4)); },
        jittered({2, 1, 4}, rng));
    CHECK(e4 < 1e-6);
}

TEST_CASE("log and sqrt") {
    CHECK(log(Tensor::scalar(1.0)).item() == 0.0);
    CHECK(sqrt(Tensor::scalar(4.0)).item() == 2.0);
    CHECK_THROWS_AS(log(Tensor::scalar(0.0)), NumericError);
    CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), NumericError);
    CHECK_THROWS_AS(sqrt(Tensor::scalar(-1.0)), NumericError);

    Rng rng(37);
    const double e1 = grad_check(
        [&](const Tensor& v) { return sum(log(v)); }, Tensor::uniform({2, 3}, rng, 0.5, 2.0));
    CHECK(e1 < 1e-5);
    const double e2 = grad_check(
        [&](const Tensor& v) { return sum(sqrt(v)); }, Tensor::uniform({2, 3}, rng, 0.5, 2.0));
    CHECK(e2 < 1e-6);
}

TEST_CASE("backward populates leaf gradients") {
    {
        Tape tape;
        Tensor x({3}, {5, -2, 7});
        x.set_requires_grad(true);
        Tensor loss = sum(x);
        tape.backward(loss);
        REQUIRE(x.has_grad());
        for (double g : x.grad()) CHECK(g == 1.0);
        CHECK(tape.consumed());
    }
    {
        Tape tape;
        Tensor x({2}, {1, 2});
        x.set_requires_grad(true);
        Tensor loss = sum(mul(x, x));
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-15));
    }
}

TEST_CASE("tape contract violations raise contract errors") {
    Tape tape;
    Tensor x({2}, {1, 2});
    x.set_requires_grad(true);
    Tensor loss = sum(x);
    CHECK_THROWS_AS(tape.backward(x), ContractError);  // non-scalar loss
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), ContractError);  // consumed tape

    Tape fresh;
    CHECK_THROWS_AS(fresh.backward(Tensor::scalar(1.0)), ContractError);  // not on tape
}

TEST_CASE("fan-out accumulates and unused branches stay grad-free") {
    Tape tape;
    Tensor x({2}, {3, 4});
    x.set_requires_grad(true);
    Tensor used = add(x, x);
    Tensor unused = mul_scalar(x, 100.0);
    Tensor loss = sum(used);
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
    CHECK_FALSE(unused.has_grad());
}

TEST_CASE("ops outside a tape record nothing") {
    Tensor x({2}, {1, 2});
    x.set_requires_grad(true);
    Tensor y = mul(x, x);
    CHECK_FALSE(y.recorded());
    Tape tape;
    Tensor z = mul(x, x);
    CHECK(z.recorded());
    CHECK(tape.node_count() == 1);
    tape.backward(sum(z));
    CHECK_FALSE(z.recorded());  // tape consumed, link expired
}

TEST_CASE("grad_check validates its own inputs") {
    Rng rng(41);
    const double err = grad_check([](const Tensor& v) { return sum(v); }, jittered({3}, rng));
    CHECK(err < 1e-10);
    CHECK_THROWS_AS(
        grad_check([](const Tensor& v) { return sum(v); }, Tensor({2}), 1.0), ContractError);
    CHECK_THROWS_AS(
        grad_check([](const Tensor& v) { return v; }, Tensor({2}), 1e-3), ContractError);
}

TEST_CASE("composite stack gradient stays within tolerance") {
    Rng rng(43);
    Tensor ker = jittered({3, 2, 4}, rng, 0.2, 0.8);
    Tensor w = jittered({4, 4}, rng, 0.2, 0.8);
    auto f = [&](const Tensor& x) {
        Tensor h = conv1d(x, ker, Padding::same);
        h = leaky_relu(h, 0.2);
        h = avg_pool1d(h, 2, 1, Padding::same);
        h = matmul(h, w);
        h = softmax_last(h);
        return mean(mul(h, h));
    };
    const double err = grad_check(f, jittered({2, 6, 2}, rng), 1e-3);
    CHECK(err < 1e-4);
}

TEST_CASE("debug checks flag non-finite forwards") {
    const bool prior = debug_checks();
    set_debug_checks(true);
    Tensor a({1}, {1.0});
    Tensor zero({1}, {0.0});
    CHECK_THROWS_AS(div(a, zero), NumericError);
    set_debug_checks(false);
    CHECK(std::isinf(div(a, zero).item()));
    set_debug_checks(prior);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "hypermix/error.hpp"
#include "hypermix/instrumentation.hpp"
#include "hypermix/ops.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tape.hpp"
#include "hypermix/tensor.hpp"

using namespace hypermix;

namespace {

// Scalar loss sum(out * w) for a fixed deterministic weighting; the tape
// gradient of each input coordinate is then checked against a central
// difference. Small shapes only — the deep end of gradient checking lives
// in the verify suite.
double loss_value(const Tensor& out, const Tensor& w) {
    double s = 0.0;
    for (i64 i = 0; i < out.numel(); ++i) s += out.data()[i] * w.data()[i];
    return s;
}

template <typename Fwd>
void check_grad(Tensor& x, Fwd fwd, double tol = 1e-6) {
    Rng wr(99);
    Tensor out0 = fwd(x);
    Tensor w = Tensor::rand_uniform(out0.shape(), wr, 0.25, 1.25);

    Tape tape;
    Tensor loss;
    {
        TapeScope scope(&tape);
        Tensor out = fwd(x);
        loss = ops::sum_all(ops::mul(out, w));
    }
    x.zero_grad();
    tape.backward(loss);
    std::vector<double> analytic(x.grad(), x.grad() + x.numel());

    const double h = 1e-6;
    for (i64 i = 0; i < x.numel(); ++i) {
        const double keep = x.data()[i];
        x.mut()[i] = keep + h;
        const double up = loss_value(fwd(x), w);
        x.mut()[i] = keep - h;
        const double dn = loss_value(fwd(x), w);
        x.mut()[i] = keep;
        const double numeric = (up - dn) / (2 * h);
        const double rel = std::fabs(analytic[static_cast<size_t>(i)] - numeric) /
                           std::max({std::fabs(numeric), std::fabs(analytic[static_cast<size_t>(i)]), 1e-2});
        CAPTURE(i);
        CHECK(rel < tol);
    }
}

}  // namespace

TEST_CASE("elementwise arithmetic and shape validation") {
    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 2}, {10, 20, 30, 40});
    CHECK(ops::add(a, b).at({1, 0}) == 33.0);
    CHECK(ops::sub(b, a).at({0, 1}) == 18.0);
    CHECK(ops::mul(a, b).at({1, 1}) == 160.0);
    CHECK(ops::scale(a, -2.0).at({0, 0}) == -2.0);
    Tensor c = Tensor::zeros({3});
    CHECK_THROWS_AS(ops::add(a, c), DimensionError);
}

TEST_CASE("matmul shapes and transpose flags") {
    Tensor a = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = Tensor::from_data({3, 2}, {7, 8, 9, 10, 11, 12});
    Tensor c = ops::matmul(a, b);
    CHECK(c.dim(0) == 2);
    CHECK(c.dim(1) == 2);
    CHECK(c.at({0, 0}) == 58.0);
    CHECK(c.at({1, 1}) == 154.0);

    // (A^T)^T path: a stored [2,3] used as [3,2] after ta.
    Tensor d = ops::matmul(a, a, false, true);  // [2,3]x[3,2] = [2,2]
    CHECK(d.at({0, 0}) == 14.0);
    CHECK(d.at({0, 1}) == 32.0);

    CHECK_THROWS_AS(ops::matmul(a, a), DimensionError);
}

TEST_CASE("softmax rows sum to one; log_softmax exponentiates to softmax") {
    Rng rng(4);
    Tensor x = Tensor::randn({5, 9}, rng, 2.0);
    Tensor s = ops::softmax(x, 1);
    Tensor ls = ops::log_softmax(x, 1);
    for (i64 r = 0; r < 5; ++r) {
        double sum = 0.0;
        for (i64 c = 0; c < 9; ++c) {
            sum += s.at({r, c});
            CHECK(std::exp(ls.at({r, c})) == doctest::Approx(s.at({r, c})).epsilon(1e-12));
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // Axis 0 normalizes columns instead.
    Tensor s0 = ops::softmax(x, 0);
    for (i64 c = 0; c < 9; ++c) {
        double sum = 0.0;
        for (i64 r = 0; r < 5; ++r) sum += s0.at({r, c});
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer_norm statistics and affine") {
    Rng rng(6);
    Tensor x = Tensor::randn({4, 16}, rng, 3.0);
    Tensor y = ops::layer_norm(x, 1, 1e-12);
    for (i64 r = 0; r < 4; ++r) {
        double mean = 0.0, var = 0.0;
        for (i64 c = 0; c < 16; ++c) mean += y.at({r, c});
        mean /= 16.0;
        for (i64 c = 0; c < 16; ++c) {
            const double d = y.at({r, c}) - mean;
            var += d * d;
        }
        var /= 16.0;  // population variance, matching the kernel
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
    Tensor g = Tensor::full({16}, 2.0);
    Tensor b = Tensor::full({16}, 0.5);
    Tensor ya = ops::layer_norm(x, 1, 1e-12, &g, &b);
    CHECK(ya.at({0, 0}) == doctest::Approx(2.0 * y.at({0, 0}) + 0.5).epsilon(1e-9));
}

TEST_CASE("glu splits the trailing axis") {
    Tensor x = Tensor::from_data({1, 4}, {3.0, -1.0, 0.0, 100.0});
    Tensor y = ops::glu(x);
    CHECK(y.dim(1) == 2);
    CHECK(y.at({0, 0}) == doctest::Approx(3.0 * 0.5));          // sigmoid(0) = 0.5
    CHECK(y.at({0, 1}) == doctest::Approx(-1.0 * 1.0).epsilon(1e-9));  // sigmoid(100) ~ 1
    Tensor odd = Tensor::zeros({1, 3});
    CHECK_THROWS_AS(ops::glu(odd), DimensionError);
}

TEST_CASE("slice and concat round-trip columns") {
    Rng rng(8);
    Tensor x = Tensor::randn({3, 10}, rng, 1.0);
    Tensor a = ops::slice_cols(x, 0, 4);
    Tensor b = ops::slice_cols(x, 4, 6);
    Tensor back = ops::concat_cols({a, b});
    CHECK(back.dim(1) == 10);
    CHECK(std::memcmp(back.data(), x.data(), sizeof(double) * 30) == 0);
    CHECK_THROWS_AS(ops::slice_cols(x, 8, 4), DimensionError);
}

TEST_CASE("heads split/merge and transpose round-trip") {
    Rng rng(10);
    Tensor x = Tensor::randn({6, 12}, rng, 1.0);
    Tensor h = ops::heads_split(x, 3);
    CHECK(h.ndim() == 3);
    CHECK(h.dim(0) == 3);
    CHECK(h.dim(1) == 6);
    CHECK(h.dim(2) == 4);
    Tensor back = ops::heads_merge(h);
    CHECK(std::memcmp(back.data(), x.data(), sizeof(double) * 72) == 0);

    Tensor t = ops::transpose(x);
    CHECK(t.dim(0) == 12);
    CHECK(t.at({5, 2}) == x.at({2, 5}));
}

TEST_CASE("nll_rows picks target log-probs and averages") {
    Tensor logp = ops::log_softmax(Tensor::from_data({2, 3}, {1, 2, 3, 0, 0, 5}), 1);
    std::vector<i64> labels = {2, 0};
    Tensor loss = ops::nll_rows(logp, labels);
    const double expect = -(logp.at({0, 2}) + logp.at({1, 0})) / 2.0;
    CHECK(loss.item() == doctest::Approx(expect).epsilon(1e-12));
    std::vector<i64> bad = {3, 0};
    CHECK_THROWS_AS(ops::nll_rows(logp, bad), InputError);
}

TEST_CASE("tape gradients match central differences on composite ops") {
    Rng rng(12);
    {
        Tensor x = Tensor::randn({3, 4}, rng, 1.0);
        check_grad(x, [](const Tensor& t) { return ops::gelu(t); });
        check_grad(x, [](const Tensor& t) { return ops::swish(t); });
        check_grad(x, [](const Tensor& t) { return ops::sigmoid(t); });
        check_grad(x, [](const Tensor& t) { return ops::softmax(t, 1); });
        check_grad(x, [](const Tensor& t) { return ops::layer_norm(t, 1, 1e-5); });
    }
    {
        Tensor x = Tensor::randn({2, 6}, rng, 1.0);
        check_grad(x, [](const Tensor& t) { return ops::glu(t); });
    }
    {
        Tensor x = Tensor::randn({4, 3}, rng, 1.0);
        Tensor w = Tensor::randn({3, 5}, rng, 1.0);
        check_grad(x, [&](const Tensor& t) { return ops::matmul(t, w); });
        check_grad(w, [&](const Tensor& t) { return ops::matmul(x, t); });
    }
    {
        Tensor x = Tensor::randn({5, 2}, rng, 1.0);
        Tensor taps = Tensor::randn({3, 2}, rng, 1.0);
        check_grad(x, [&](const Tensor& t) { return ops::conv1d_depthwise(t, taps); });
        check_grad(taps, [&](const Tensor& t) { return ops::conv1d_depthwise(x, t); });
    }
}

TEST_CASE("gradients accumulate across backward calls") {
    Tensor x = Tensor::from_data({2}, {1.0, 2.0});
    for (int round = 0; round < 2; ++round) {
        Tape tape;
        Tensor loss;
        {
            TapeScope scope(&tape);
            loss = ops::sum_all(ops::mul(x, x));
        }
        tape.backward(loss);
    }
    // d/dx sum(x^2) = 2x, run twice without zeroing = 4x.
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    CHECK(x.grad()[1] == doctest::Approx(8.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("ops run without a tape and record nothing") {
    Tape tape;
    Tensor a = Tensor::from_data({2}, {1, 2});
    Tensor b = ops::scale(a, 3.0);  // no active tape
    CHECK(tape.node_count() == 0);
    {
        TapeScope scope(&tape);
        Tensor c = ops::scale(a, 3.0);
        CHECK(tape.node_count() > 0);
        TapeScope inner(nullptr);  // suspension nests
        Tensor d = ops::scale(a, 3.0);
    }
    CHECK(b.at({0}) == 3.0);
}

TEST_CASE("flop counters charge the documented conventions") {
    Rng rng(14);
    Tensor a = Tensor::randn({8, 16}, rng, 1.0);
    Tensor b = Tensor::randn({16, 4}, rng, 1.0);
    MeasureResult mm = measure([&] { Tensor c = ops::matmul(a, b); });
    CHECK(mm.flops == 2 * 8 * 16 * 4);

    MeasureResult sm = measure([&] { Tensor c = ops::softmax(a, 1); });
    CHECK(sm.flops == 5 * 8 * 16);

    MeasureResult ad = measure([&] { Tensor c = ops::add(a, a); });
    CHECK(ad.flops == 8 * 16);

    // Movement ops charge nothing.
    MeasureResult tr = measure([&] { Tensor c = ops::transpose(a); });
    CHECK(tr.flops == 0);
    MeasureResult hs = measure([&] { Tensor c = ops::heads_split(a, 2); });
    CHECK(hs.flops == 0);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hypermix/ctc.hpp"
#include "hypermix/error.hpp"
#include "hypermix/ops.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tape.hpp"
#include "hypermix/tensor.hpp"

using namespace hypermix;

namespace {

Tensor log_rows(const std::vector<std::vector<double>>& rows) {
    const i64 n = static_cast<i64>(rows.size());
    const i64 c = static_cast<i64>(rows.front().size());
    std::vector<double> flat;
    for (const auto& r : rows)
        for (double p : r) flat.push_back(std::log(p));
    return Tensor::from_data({n, c}, std::move(flat));
}

}  // namespace

TEST_CASE("hand-worked two-frame lattice") {
    // Uniform-ish rows p(blank)=0.2, p(1)=0.3, p(2)=0.5 at both frames.
    Tensor lp = log_rows({{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}});

    // target [1]: paths (1,1), (blank,1), (1,blank) -> 0.09+0.06+0.06 = 0.21
    CHECK(ctc_loss(lp, {1}).item() == doctest::Approx(-std::log(0.21)).epsilon(1e-12));
    // target [1,2]: only path (1,2) -> 0.15
    CHECK(ctc_loss(lp, {1, 2}).item() == doctest::Approx(-std::log(0.15)).epsilon(1e-12));
    // empty target: all-blank path -> 0.04
    CHECK(ctc_loss(lp, {}).item() == doctest::Approx(-std::log(0.04)).epsilon(1e-12));
}

TEST_CASE("repeat needs a separating blank") {
    Tensor lp2 = log_rows({{0.2, 0.8}, {0.2, 0.8}});
    // [1,1] needs at least 3 frames (blank between repeats).
    CHECK_THROWS_AS(ctc_loss(lp2, {1, 1}), InfeasibleError);
    Tensor lp3 = log_rows({{0.2, 0.8}, {0.2, 0.8}, {0.2, 0.8}});
    // Exactly one path: (1, blank, 1) -> 0.8*0.2*0.8
    CHECK(ctc_loss(lp3, {1, 1}).item() ==
          doctest::Approx(-std::log(0.8 * 0.2 * 0.8)).epsilon(1e-12));
}

TEST_CASE("too many labels for the frames is infeasible") {
    Tensor lp = log_rows({{0.2, 0.4, 0.4}, {0.2, 0.4, 0.4}});
    CHECK_THROWS_AS(ctc_loss(lp, {1, 2, 1}), InfeasibleError);
}

TEST_CASE("labels must be in range and rows normalized") {
    Tensor lp = log_rows({{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}});
    CHECK_THROWS_AS(ctc_loss(lp, {3}), InputError);
    CHECK_THROWS_AS(ctc_loss(lp, {0}), InputError);  // blank is not a label
    Tensor bad = Tensor::from_data({1, 3}, {-1.0, -1.0, -1.0});  // exp-sum != 1
    CHECK_THROWS_AS(ctc_loss(bad, {1}), InputError);
}

TEST_CASE("loss is a proper distribution over target strings") {
    // Summing exp(-loss) over every possible target string (lengths 0..N)
    // must give exactly 1: the alignments partition path space.
    Rng rng(5);
    const i64 n = 4, classes = 3;
    Tensor lp = ops::log_softmax(Tensor::randn({n, classes}, rng, 1.0), 1);

    double total = 0.0;
    // Enumerate all label strings of length 0..4 over {1, 2} that are feasible.
    std::vector<std::vector<i64>> all = {{}};
    for (i64 len = 1; len <= n; ++len) {
        const i64 count = static_cast<i64>(std::pow(2.0, static_cast<double>(len)));
        for (i64 mask = 0; mask < count; ++mask) {
            std::vector<i64> t;
            i64 m = mask;
            for (i64 i = 0; i < len; ++i) {
                t.push_back(1 + (m & 1));
                m >>= 1;
            }
            all.push_back(t);
        }
    }
    for (const auto& t : all) {
        i64 repeats = 0;
        for (size_t i = 1; i < t.size(); ++i) repeats += t[i] == t[i - 1] ? 1 : 0;
        if (static_cast<i64>(t.size()) + repeats > n) continue;
        total += std::exp(-ctc_loss(lp, t).item());
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gradient through the lattice matches central differences") {
    Rng rng(9);
    const i64 n = 5, classes = 4;
    Tensor logits = Tensor::randn({n, classes}, rng, 1.0);
    const std::vector<i64> targets = {2, 1, 1};

    auto loss_of = [&](const Tensor& lg) {
        return ctc_loss(ops::log_softmax(lg, 1), targets).item();
    };

    Tape tape;
    Tensor loss;
    {
        TapeScope scope(&tape);
        loss = ctc_loss(ops::log_softmax(logits, 1), targets);
    }
    logits.zero_grad();
    tape.backward(loss);

    const double h = 1e-6;
    for (i64 i = 0; i < logits.numel(); ++i) {
        const double keep = logits.data()[i];
        logits.mut()[i] = keep + h;
        const double up = loss_of(logits);
        logits.mut()[i] = keep - h;
        const double dn = loss_of(logits);
        logits.mut()[i] = keep;
        const double numeric = (up - dn) / (2 * h);
        const double analytic = logits.grad()[i];
        const double rel = std::fabs(analytic - numeric) /
                           std::max({std::fabs(analytic), std::fabs(numeric), 1e-2});
        CAPTURE(i);
        CHECK(rel < 1e-6);
    }
}

TEST_CASE("greedy decode collapses repeats then drops blanks") {
    // argmax ids per frame: 1 1 0 1 2 2 0 0 -> collapse -> 1 1 2 (blank splits
    // the repeated 1s) -> after dropping blanks: 1 1 2.
    auto row = [](i64 hot, i64 classes) {
        std::vector<double> r(static_cast<size_t>(classes), 0.05);
        r[static_cast<size_t>(hot)] = 0.9;
        return r;
    };
    std::vector<std::vector<double>> rows;
    for (i64 id : {1, 1, 0, 1, 2, 2, 0, 0}) rows.push_back(row(id, 3));
    // Normalize rows to be safe (0.9 + 2*0.05 = 1.0 already).
    Tensor lp = log_rows(rows);
    std::vector<i64> out = greedy_decode(lp);
    const std::vector<i64> expect = {1, 1, 2};
    CHECK(out == expect);
}

TEST_CASE("greedy decode of all blanks is empty") {
    std::vector<std::vector<double>> rows(3, {0.8, 0.1, 0.1});
    std::vector<i64> out = greedy_decode(log_rows(rows));
    CHECK(out.empty());
}

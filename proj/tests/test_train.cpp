#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "hypermix/config.hpp"
#include "hypermix/error.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"
#include "hypermix/train.hpp"

using namespace hypermix;

TEST_CASE("task names round-trip") {
    for (ToyTaskKind kind :
         {ToyTaskKind::FirstTokenMatch, ToyTaskKind::GlobalMajority, ToyTaskKind::CtcStrings}) {
        CHECK(toy_task_from_name(toy_task_name(kind)) == kind);
    }
    CHECK_THROWS_AS(toy_task_from_name("mnist"), ConfigError);
}

TEST_CASE("samples are deterministic per rng stream") {
    ToyTask task;
    Rng a(3), b(3);
    ToySample sa = make_sample(task, a);
    ToySample sb = make_sample(task, b);
    CHECK(sa.frame_labels == sb.frame_labels);
    CHECK(sa.features.numel() == sb.features.numel());
    CHECK(std::memcmp(sa.features.data(), sb.features.data(),
                      static_cast<size_t>(sa.features.numel()) * sizeof(double)) == 0);
}

TEST_CASE("first-token-match labels follow the matching rule") {
    ToyTask task;
    task.kind = ToyTaskKind::FirstTokenMatch;
    Rng rng(11);
    i64 matches = 0, total = 0;
    for (int round = 0; round < 40; ++round) {
        ToySample s = make_sample(task, rng);
        const i64 n = s.features.dim(0);
        REQUIRE(n >= task.n_min);
        REQUIRE(n <= task.n_max);
        // Recover symbol ids from the one-hot rows.
        auto id_of = [&](i64 t) {
            for (i64 c = 0; c < s.features.dim(1); ++c)
                if (s.features.at({t, c}) == 1.0) return c;
            return static_cast<i64>(-1);
        };
        const i64 anchor = id_of(0);
        for (i64 t = 0; t < n; ++t) {
            const i64 expect = id_of(t) == anchor ? 2 : 1;
            REQUIRE(s.frame_labels[static_cast<size_t>(t)] == expect);
            matches += expect == 2 ? 1 : 0;
            ++total;
        }
    }
    // Labels stay balanced: matching is a fair coin away from frame 0.
    const double rate = static_cast<double>(matches) / static_cast<double>(total);
    CHECK(rate > 0.40);
    CHECK(rate < 0.60);
}

TEST_CASE("global-majority labels carry the realized majority") {
    ToyTask task;
    task.kind = ToyTaskKind::GlobalMajority;
    Rng rng(13);
    i64 class_one = 0, rounds = 200;
    for (int round = 0; round < rounds; ++round) {
        ToySample s = make_sample(task, rng);
        const i64 n = s.features.dim(0);
        i64 ones = 0;
        for (i64 t = 0; t < n; ++t) ones += s.features.at({t, 1}) == 1.0 ? 1 : 0;
        const i64 majority = 2 * ones > n ? 1 : 0;
        for (i64 t = 0; t < n; ++t)
            REQUIRE(s.frame_labels[static_cast<size_t>(t)] == majority + 1);
        class_one += majority;
    }
    // The planted symbol is a fair coin, so both classes appear.
    CHECK(class_one > rounds / 4);
    CHECK(class_one < 3 * rounds / 4);
}

TEST_CASE("ctc-strings paints spans and collapses them into targets") {
    ToyTask task;
    task.kind = ToyTaskKind::CtcStrings;
    Rng rng(17);
    for (int round = 0; round < 40; ++round) {
        ToySample s = make_sample(task, rng);
        const i64 n = s.features.dim(0);
        REQUIRE(!s.ctc_targets.empty());
        REQUIRE(static_cast<i64>(s.ctc_targets.size()) <= 5);
        // Frame labels are the painted symbols (input id + 1).
        for (i64 t = 0; t < n; ++t) {
            i64 id = -1;
            for (i64 c = 0; c < s.features.dim(1); ++c)
                if (s.features.at({t, c}) == 1.0) id = c;
            REQUIRE(s.frame_labels[static_cast<size_t>(t)] == id + 1);
        }
        // Targets are the non-empty spans' symbols in order. Adjacent spans
        // may repeat a symbol, so the targets collapse to the same string as
        // the frame labels but may be longer than that collapse.
        auto collapse = [](const std::vector<i64>& seq) {
            std::vector<i64> out;
            for (i64 v : seq)
                if (out.empty() || out.back() != v) out.push_back(v);
            return out;
        };
        const std::vector<i64> from_frames = collapse(s.frame_labels);
        REQUIRE(collapse(s.ctc_targets) == from_frames);
        REQUIRE(s.ctc_targets.size() >= from_frames.size());
    }
}

TEST_CASE("toy encoder config is the documented desk shape") {
    EncoderConfig cfg = toy_encoder_config();
    CHECK(cfg.d_model == 32);
    CHECK(cfg.n_layers == 2);
    CHECK(cfg.k == 4);
    CHECK(cfg.d_ffn == 128);
    CHECK(cfg.d_prime == 128);
    CHECK(cfg.kernel == 7);
    validate(cfg);
}

TEST_CASE("toy log-probs are normalized rows of the right width") {
    ToyTask task;
    Rng rng(19);
    ToyModel m = ToyModel::init(toy_encoder_config(), ModelKind::Hyperconformer, task,
                                task.n_max, rng);
    ToySample s = make_sample(task, rng);
    Tensor lp = toy_log_probs(s.features, m);
    CHECK(lp.dim(0) == s.features.dim(0));
    CHECK(lp.dim(1) == task.num_classes());
    for (i64 t = 0; t < lp.dim(0); ++t) {
        double sum = 0.0;
        for (i64 c = 0; c < lp.dim(1); ++c) sum += std::exp(lp.at({t, c}));
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("two training epochs reduce the loss") {
    ToyTask task;
    TrainToyOptions opt;
    opt.epochs = 2;
    opt.train_samples = 24;
    opt.eval_samples = 8;
    TrainResult res = train_toy(task, toy_encoder_config(), ModelKind::Hyperconformer, opt);
    REQUIRE(res.epoch_loss.size() == 2);
    CHECK(res.epoch_loss[1] < res.epoch_loss[0]);
    CHECK(res.steps_run == 48);
    CHECK(res.final_accuracy >= 0.0);
    CHECK(res.final_accuracy <= 1.0);
}

TEST_CASE("training is reproducible for a fixed seed") {
    ToyTask task;
    TrainToyOptions opt;
    opt.epochs = 1;
    opt.train_samples = 12;
    opt.eval_samples = 6;
    opt.seed = 23;
    TrainResult a = train_toy(task, toy_encoder_config(), ModelKind::Conformer, opt);
    TrainResult b = train_toy(task, toy_encoder_config(), ModelKind::Conformer, opt);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.epoch_accuracy == b.epoch_accuracy);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "hypermix/bench.hpp"
#include "hypermix/config.hpp"
#include "hypermix/error.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"
#include "hypermix/train.hpp"

using namespace hypermix;

namespace {

EncoderConfig bench_test_config() {
    EncoderConfig cfg;
    cfg.d_model = 16;
    cfg.n_layers = 1;
    cfg.k = 2;
    cfg.d_ffn = 24;
    cfg.d_prime = 24;
    cfg.kernel = 5;
    validate(cfg);
    return cfg;
}

struct TempPath {
    std::string base;
    explicit TempPath(const std::string& b) : base(b) {}
    ~TempPath() {
        std::remove((base + ".csv").c_str());
        std::remove((base + ".svg").c_str());
    }
};

}  // namespace

TEST_CASE("median of odd, even, and singleton lists; empty raises") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({5.0, 1.0, 3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS_AS(median({}), UsageError);
}

TEST_CASE("scaling bench emits one record per model-length-repeat") {
    EncoderConfig cfg = bench_test_config();
    const std::vector<ModelKind> models = {ModelKind::Conformer, ModelKind::Hyperconformer};
    auto records = run_scaling_bench(cfg, models, {1, 2}, 2, 5);
    CHECK(records.size() == 2 * 2 * 2);
    for (const auto& r : records) {
        CHECK(r.n_frames == subsampled_len(r.seq_seconds * kFramesPerSecond));
        CHECK(r.duration_seconds > 0.0);
        CHECK(r.peak_bytes > 0);
        CHECK(r.flops > 0);
        CHECK(r.d_model == 16);
    }
    // Repeats of a deterministic forward agree exactly on counters.
    CHECK(records[0].flops == records[1].flops);
    CHECK(records[0].peak_bytes == records[1].peak_bytes);
    CHECK_THROWS_AS(run_scaling_bench(cfg, {}, {1}, 1, 5), UsageError);
    CHECK_THROWS_AS(run_scaling_bench(cfg, models, {1}, 0, 5), UsageError);
}

TEST_CASE("head bench compares one head against the configured count") {
    EncoderConfig cfg = bench_test_config();
    auto records = run_head_bench(cfg, {1}, 1, 5);
    CHECK(records.size() == 2);
    CHECK(records[0].heads == 1);
    CHECK(records[1].heads == cfg.k);
    CHECK(records[0].model != records[1].model);  // labels carry the head count
    // Fewer heads means more mixing arithmetic.
    CHECK(records[0].flops > records[1].flops);
}

TEST_CASE("csv round-trips records exactly, including full-precision doubles") {
    std::vector<BenchRecord> records;
    BenchRecord r;
    r.model = "conformer";
    r.gi_kind = "mhsa";
    r.heads = 8;
    r.d_model = 144;
    r.seq_seconds = 6;
    r.n_frames = 149;
    r.repeat_index = 0;
    r.duration_seconds = 0.12345678901234567;  // needs all 17 digits
    r.peak_bytes = 123456789;
    r.flops = 987654321012345;
    records.push_back(r);
    r.model = "hyperconformer";
    r.gi_kind = "hypermixer";
    r.repeat_index = 1;
    r.duration_seconds = 3.0000000000000004;  // classic round-trip trap
    records.push_back(r);

    TempPath tmp("harness_roundtrip_test");
    emit_report(records, tmp.base);

    std::ifstream csv(tmp.base + ".csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header ==
          "model,gi_kind,heads,d_model,seq_seconds,n_frames,repeat,duration_seconds,peak_bytes,"
          "flops");

    auto parsed = parse_report_csv(tmp.base + ".csv");
    REQUIRE(parsed.size() == records.size());
    for (size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].model == records[i].model);
        CHECK(parsed[i].gi_kind == records[i].gi_kind);
        CHECK(parsed[i].heads == records[i].heads);
        CHECK(parsed[i].d_model == records[i].d_model);
        CHECK(parsed[i].seq_seconds == records[i].seq_seconds);
        CHECK(parsed[i].n_frames == records[i].n_frames);
        CHECK(parsed[i].repeat_index == records[i].repeat_index);
        // Bitwise double round-trip, not approximate.
        CHECK(std::memcmp(&parsed[i].duration_seconds, &records[i].duration_seconds,
                          sizeof(double)) == 0);
        CHECK(parsed[i].peak_bytes == records[i].peak_bytes);
        CHECK(parsed[i].flops == records[i].flops);
    }

    std::ifstream svg(tmp.base + ".svg");
    REQUIRE(svg.good());
    std::string all((std::istreambuf_iterator<char>(svg)), std::istreambuf_iterator<char>());
    CHECK(all.find("<svg") != std::string::npos);
    CHECK(all.find("conformer") != std::string::npos);
    CHECK(all.find("polyline") != std::string::npos);
}

TEST_CASE("emit_report refuses empty input and parse rejects foreign headers") {
    CHECK_THROWS_AS(emit_report({}, "should_never_exist"), UsageError);
    {
        std::ofstream bad("harness_badheader_test.csv", std::ios::binary);
        bad << "time,stuff\n1,2\n";
    }
    CHECK_THROWS_AS(parse_report_csv("harness_badheader_test.csv"), InputError);
    std::remove("harness_badheader_test.csv");
    CHECK_THROWS_AS(parse_report_csv("no_such_file.csv"), Error);
}

TEST_CASE("summarize groups by model and length in record order") {
    std::vector<BenchRecord> records;
    for (i64 rep = 0; rep < 3; ++rep) {
        BenchRecord r;
        r.model = "m1";
        r.seq_seconds = 6;
        r.repeat_index = rep;
        r.duration_seconds = static_cast<double>(rep + 1);  // 1, 2, 3 -> median 2
        r.peak_bytes = 100;
        r.flops = 50;
        records.push_back(r);
    }
    BenchRecord other;
    other.model = "m2";
    other.seq_seconds = 6;
    other.duration_seconds = 9.0;
    other.peak_bytes = 7;
    other.flops = 8;
    records.push_back(other);

    auto sums = summarize(records);
    REQUIRE(sums.size() == 2);
    CHECK(sums[0].model == "m1");
    CHECK(sums[0].median_duration == 2.0);
    CHECK(sums[0].peak_bytes == 100);
    CHECK(sums[1].model == "m2");
    CHECK(sums[1].median_duration == 9.0);
}

TEST_CASE("adam with zero learning rate leaves parameters bit-identical") {
    Rng rng(7);
    Tensor w = Tensor::randn({4, 4}, rng, 1.0);
    std::vector<double> before(w.data(), w.data() + w.numel());

    AdamConfig cfg;
    cfg.lr = 0.0;
    Adam opt({w}, cfg);
    for (int step = 0; step < 3; ++step) {
        opt.zero_grads();
        for (i64 i = 0; i < w.numel(); ++i) w.grad()[i] = 0.5 + static_cast<double>(i);
        opt.step();
    }
    CHECK(std::memcmp(before.data(), w.data(),
                      static_cast<size_t>(w.numel()) * sizeof(double)) == 0);
    CHECK(opt.steps_taken() == 3);
}

TEST_CASE("adam descends a convex bowl") {
    // Minimize ||w - target||^2 by hand-fed gradients.
    Tensor w = Tensor::from_data({2}, {5.0, -3.0});
    const double target0 = 1.0, target1 = 2.0;
    AdamConfig cfg;
    cfg.lr = 0.05;
    Adam opt({w}, cfg);
    for (int step = 0; step < 400; ++step) {
        opt.zero_grads();
        w.grad()[0] = 2.0 * (w.data()[0] - target0);
        w.grad()[1] = 2.0 * (w.data()[1] - target1);
        opt.step();
    }
    CHECK(w.data()[0] == doctest::Approx(target0).epsilon(1e-3));
    CHECK(w.data()[1] == doctest::Approx(target1).epsilon(1e-3));
}

TEST_CASE("adam warmup ramps the step size from zero") {
    // With warmup, the first step moves less than an un-warmed step.
    auto first_step_delta = [](i64 warmup) {
        Tensor w = Tensor::from_data({1}, {1.0});
        AdamConfig cfg;
        cfg.lr = 0.1;
        cfg.warmup_steps = warmup;
        Adam opt({w}, cfg);
        opt.zero_grads();
        w.grad()[0] = 1.0;
        opt.step();
        return std::fabs(1.0 - w.data()[0]);
    };
    CHECK(first_step_delta(10) < first_step_delta(0));
    CHECK(first_step_delta(10) > 0.0);
}

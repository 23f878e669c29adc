#pragma once

#include <string>
#include <vector>

#include "hypermix/config.hpp"
#include "hypermix/tensor.hpp"

// The efficiency study: encoder forward passes over synthetic feature
// matrices at the nominal audio lengths (100 frames per second, so L seconds
// -> 100*L input frames), with wall time, engine-counted peak bytes, and
// engine-counted flops per repeat. Two warmup passes run and are discarded
// before the recorded repeats. Timing is pinned to one worker thread so
// medians stay stable; every input is derived from the given seed and a
// model at a given length always sees the same input as its competitors.

namespace hypermix {

struct BenchRecord {
    std::string model;
    std::string gi_kind;
    i64 heads = 0;
    i64 d_model = 0;
    i64 seq_seconds = 0;
    i64 n_frames = 0;  // post-subsampling length
    i64 repeat_index = 0;
    double duration_seconds = 0.0;
    i64 peak_bytes = 0;
    i64 flops = 0;
};

inline constexpr i64 kFramesPerSecond = 100;
inline constexpr i64 kBenchWarmups = 2;

// One record per model x length x repeat (all repeats are kept; assertions
// take medians).
std::vector<BenchRecord> run_scaling_bench(const EncoderConfig& cfg,
                                           const std::vector<ModelKind>& models,
                                           const std::vector<i64>& lengths_seconds, i64 repeats,
                                           u64 seed);

// The head ablation: the conformer-style token-mixing model with k = 1
// versus k = cfg.k, identical inputs across the two.
std::vector<BenchRecord> run_head_bench(const EncoderConfig& cfg,
                                        const std::vector<i64>& lengths_seconds, i64 repeats,
                                        u64 seed);

// Writes <base>.csv (schema: model,gi_kind,heads,d_model,seq_seconds,
// n_frames,repeat,duration_seconds,peak_bytes,flops; LF endings) and
// <base>.svg (time-vs-length lines per model with a peak-bytes marker
// overlay). Empty records -> UsageError; write failures name the path.
void emit_report(const std::vector<BenchRecord>& records, const std::string& out_base);

// Exact inverse of the CSV writer (used by the round-trip checks).
std::vector<BenchRecord> parse_report_csv(const std::string& path);

double median(std::vector<double> xs);

// Median duration/peak/flops per (model, seq_seconds), in record order.
struct BenchSummary {
    std::string model;
    i64 seq_seconds = 0;
    double median_duration = 0.0;
    i64 peak_bytes = 0;
    i64 flops = 0;
};
std::vector<BenchSummary> summarize(const std::vector<BenchRecord>& records);

}  // namespace hypermix

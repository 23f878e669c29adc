#include "hypermix/instrumentation.hpp"

#include <algorithm>
#include <chrono>

namespace hypermix {

InstrumentationStats& counters() {
    thread_local InstrumentationStats stats;
    return stats;
}

void count_alloc(std::int64_t bytes) {
    auto& c = counters();
    c.live_bytes += bytes;
    c.peak_bytes = std::max(c.peak_bytes, c.live_bytes);
}

void count_free(std::int64_t bytes) {
    counters().live_bytes -= bytes;
}

void count_flops(std::int64_t n) {
    counters().flops += n;
}

MeasureResult measure(const std::function<void()>& f) {
    auto& c = counters();
    const std::int64_t flops_before = c.flops;
    c.flops = 0;
    c.peak_bytes = c.live_bytes;

    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();

    MeasureResult r;
    r.peak_bytes = c.peak_bytes;
    r.flops = c.flops;
    r.seconds = std::chrono::duration<double>(t1 - t0).count();
    c.flops += flops_before;
    return r;
}

}  // namespace hypermix

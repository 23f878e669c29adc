#pragma once

#include <cstdint>
#include <functional>

namespace hypermix {

// Engine counters, one set per thread. live_bytes tracks tensor payload
// (data + grad) currently allocated on this thread; peak_bytes is the high
// water mark since the last reset; flops counts arithmetic using the fixed
// conventions in flops.hpp (multiply-add = 2, elementwise nonlinearity = 1
// per element).
struct InstrumentationStats {
    std::int64_t live_bytes = 0;
    std::int64_t peak_bytes = 0;
    std::int64_t flops = 0;
};

InstrumentationStats& counters();

void count_alloc(std::int64_t bytes);
void count_free(std::int64_t bytes);
void count_flops(std::int64_t n);

struct MeasureResult {
    std::int64_t peak_bytes = 0;  // high water mark of live payload inside the window
    std::int64_t flops = 0;       // arithmetic performed inside the window
    double seconds = 0.0;
};

// Runs f with flops zeroed and the peak reset to the currently live bytes,
// so back-to-back windows each report their own peak rather than a running
// maximum. Wall time uses a monotonic clock.
MeasureResult measure(const std::function<void()>& f);

}  // namespace hypermix

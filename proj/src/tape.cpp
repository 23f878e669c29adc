#include "hypermix/tape.hpp"

#include "hypermix/error.hpp"

namespace hypermix {

namespace {
thread_local Tape* g_active = nullptr;
}

Tape* Tape::active() { return g_active; }

void Tape::record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(Tensor& loss) {
    if (loss.numel() != 1) {
        throw DimensionError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    }
    loss.grad()[0] += 1.0;
    TapeScope suspend(nullptr);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape* tape) : previous_(g_active) { g_active = tape; }

TapeScope::~TapeScope() { g_active = previous_; }

}  // namespace hypermix

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "hypermix/tensor.hpp"

namespace hypermix {

// Reverse-mode tape. Ops executed while a tape is active append a backward
// closure; backward() replays them newest-first. A tape is single-threaded;
// independent tapes on different threads don't interact (the active pointer
// is thread-local).
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(std::function<void()> backward_fn);

    // Seeds d(loss)/d(loss) = 1 and replays all closures in reverse order.
    // Recording is suspended while closures run, so backward passes may be
    // built from the same forward ops. Gradients accumulate; call zero_grad
    // on parameters between uses.
    void backward(Tensor& loss);

    std::size_t node_count() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    std::vector<std::function<void()>> nodes_;
};

// RAII activation. TapeScope(nullptr) suspends recording.
class TapeScope {
  public:
    explicit TapeScope(Tape* tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* previous_;
};

}  // namespace hypermix

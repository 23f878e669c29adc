#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hypermix/rng.hpp"

namespace hypermix {

using i64 = std::int64_t;
using u64 = std::uint64_t;

i64 shape_numel(const std::vector<i64>& shape);
std::string shape_str(const std::vector<i64>& shape);

// Dense row-major double tensor. A Tensor is a cheap handle onto shared
// storage; copies alias. Values are treated as immutable once an op has
// produced them (mut() exists for the construction phase inside ops), which
// is what makes concurrent forward passes on shared parameters safe. The
// gradient buffer lives beside the data and is allocated lazily on first
// accumulation.
//
// Payload bytes (data, and grad once allocated) are registered with the
// per-thread instrumentation counters on allocation and released in the
// storage destructor.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<i64> shape);
    static Tensor full(std::vector<i64> shape, double value);
    static Tensor uninit(std::vector<i64> shape);
    static Tensor scalar(double value);
    static Tensor from_data(std::vector<i64> shape, std::vector<double> values);
    static Tensor randn(std::vector<i64> shape, Rng& rng, double stddev);
    static Tensor rand_uniform(std::vector<i64> shape, Rng& rng, double lo, double hi);

    bool defined() const { return static_cast<bool>(st_); }
    const std::vector<i64>& shape() const { return shape_; }
    i64 ndim() const { return static_cast<i64>(shape_.size()); }
    i64 dim(i64 i) const { return shape_[static_cast<size_t>(i)]; }
    i64 numel() const;

    const double* data() const;
    double* mut();
    double item() const;
    double at(std::initializer_list<i64> idx) const;

    bool grad_allocated() const;
    double* grad();           // allocates zeros on first call
    const double* grad_if() const;  // nullptr when not yet allocated
    void zero_grad();

    // New handle onto the same storage with a different shape (same numel).
    // Free: no copy, no tape node; gradients flow through the shared buffer.
    Tensor reshaped(std::vector<i64> shape) const;

    // View of the first n rows of a 2-D tensor (contiguous prefix).
    Tensor prefix_rows(i64 n) const;

    bool same_storage(const Tensor& other) const { return st_ == other.st_; }

  private:
    struct Storage;
    std::shared_ptr<Storage> st_;
    std::vector<i64> shape_;
};

}  // namespace hypermix

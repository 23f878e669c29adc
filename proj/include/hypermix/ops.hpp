#pragma once

#include <vector>

#include "hypermix/tape.hpp"
#include "hypermix/tensor.hpp"

// Differentiable operations. Each op validates shapes, allocates its output,
// runs the parallel kernels, charges the flop helpers, and (when a tape is
// active) records a backward closure. Backward closures run with recording
// suspended, so they reuse ops and kernels freely.

namespace hypermix::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);

// y = x + v broadcast over rows; v has length = trailing dimension.
Tensor add_rowvec(const Tensor& x, const Tensor& v);

// C = op_a(A) . op_b(B) for 2-D tensors, transpose applied when the flag is set.
Tensor matmul(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

// Batched matmul on [batch, m, k] x [batch, k, n] (extents after transpose).
Tensor bmm(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false);

Tensor transpose(const Tensor& x);

// [N, k*dk] -> [k, N, dk]; the inverse merges heads back.
Tensor heads_split(const Tensor& x, i64 k);
Tensor heads_merge(const Tensor& x);

Tensor softmax(const Tensor& x, i64 axis);
Tensor log_softmax(const Tensor& x, i64 axis);

// (x - mean) / sqrt(var + eps) along `axis`; gain/bias (length = extent of
// that axis) are optional and must come together.
Tensor layer_norm(const Tensor& x, i64 axis, double eps,
                  const Tensor* gain = nullptr, const Tensor* bias = nullptr);

Tensor gelu(const Tensor& x);
Tensor swish(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Gated linear unit over the trailing axis: splits [..., 2w] into halves
// a, b and returns a * sigmoid(b) of shape [..., w].
Tensor glu(const Tensor& x);

// Depthwise 1-D convolution: x [N, ch], taps [K, ch], zero padding, odd K.
Tensor conv1d_depthwise(const Tensor& x, const Tensor& taps);

Tensor sum_all(const Tensor& x);

// Mean negative log-likelihood of per-row targets: logp is [N, C] of
// log-probabilities, labels holds N class ids.
Tensor nll_rows(const Tensor& logp, const std::vector<i64>& labels);

Tensor slice_cols(const Tensor& x, i64 c0, i64 width);
Tensor concat_cols(const std::vector<Tensor>& parts);

}  // namespace hypermix::ops

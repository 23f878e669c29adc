#pragma once

#include <cstdint>

// Raw array kernels. The primary set in hypermix::kernels parallelizes over
// independent output elements with OpenMP; hypermix::kernels::serial holds a
// plain-loop reference with the same accumulation order per element, so the
// two produce bit-identical results at any thread count. Tests compare them;
// benchmarks/kernel_bench times them against each other.
//
// Kernels do no allocation and no flop counting; both belong to the op layer.

namespace hypermix::kernels {

using i64 = std::int64_t;

// Scalar math shared by both variants and by backward passes.
double gelu_scalar(double x);        // x * Phi(x), exact erf form
double gelu_grad_scalar(double x);   // Phi(x) + x * phi(x)
double sigmoid_scalar(double x);
double swish_scalar(double x);       // x * sigmoid(x)
double swish_grad_scalar(double x);

// C[m x n] = op_a(A) * op_b(B); op is transpose when the flag is set.
// A is m x k after op_a, B is k x n after op_b, all row-major.
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n,
            bool ta, bool tb);

// Batched matmul over `batch` independent problems with contiguous strides.
void bmm(const double* a, const double* b, double* c, i64 batch, i64 m, i64 k,
         i64 n, bool ta, bool tb);

void add(const double* a, const double* b, double* out, i64 n);
void sub(const double* a, const double* b, double* out, i64 n);
void mul(const double* a, const double* b, double* out, i64 n);
void scale(const double* a, double s, double* out, i64 n);
void axpy(double alpha, const double* x, double* y, i64 n);  // y += alpha*x

void gelu(const double* x, double* out, i64 n);
// out[i] = g[i] * gelu'(x[i]); used by the backward pass.
void gelu_backward(const double* x, const double* g, double* out, i64 n);
void swish(const double* x, double* out, i64 n);
void swish_backward(const double* x, const double* g, double* out, i64 n);
void sigmoid(const double* x, double* out, i64 n);

// Lane-wise softmax with max subtraction. The tensor is viewed as
// [outer, len, inner]; each lane runs over the len axis.
void softmax_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner);

// Lane-wise layer norm: (x - mean) / sqrt(var + eps), optional affine per
// lane position. mean/rstd buffers (outer*inner each) are stashed for the
// backward pass; pass nullptr to discard.
void layernorm_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner,
                     double eps, const double* gain, const double* bias,
                     double* mean_out, double* rstd_out);

// out[r, :] = x[r, :] + v  for a [rows x cols] matrix.
void add_rowvec(const double* x, const double* v, double* out, i64 rows, i64 cols);

// v[c] = sum_r x[r, c]; accumulation over rows in ascending order.
void colsum(const double* x, double* v, i64 rows, i64 cols);

// Depthwise 1-D convolution, zero padding, odd K, per-channel taps.
// x is [n x ch], w is [K x ch], out is [n x ch].
void conv1d_depthwise(const double* x, const double* w, double* out, i64 n,
                      i64 ch, i64 K);
void conv1d_depthwise_dx(const double* g, const double* w, double* dx, i64 n,
                         i64 ch, i64 K);
void conv1d_depthwise_dw(const double* x, const double* g, double* dw, i64 n,
                         i64 ch, i64 K);

void transpose2d(const double* x, double* out, i64 rows, i64 cols);

// [N x (k*dk)] -> [k x N x dk] and back.
void heads_split(const double* x, double* out, i64 n, i64 k, i64 dk);
void heads_merge(const double* x, double* out, i64 n, i64 k, i64 dk);

void copy_cols(const double* x, double* out, i64 rows, i64 cols, i64 c0, i64 width);
// Adds src [rows x width] into dst columns [c0, c0+width) of a [rows x cols] matrix.
void accum_cols(const double* src, double* dst, i64 rows, i64 cols, i64 c0, i64 width);

namespace serial {

void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n,
            bool ta, bool tb);
void bmm(const double* a, const double* b, double* c, i64 batch, i64 m, i64 k,
         i64 n, bool ta, bool tb);
void gelu(const double* x, double* out, i64 n);
void softmax_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner);
void layernorm_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner,
                     double eps, const double* gain, const double* bias,
                     double* mean_out, double* rstd_out);
void conv1d_depthwise(const double* x, const double* w, double* out, i64 n,
                      i64 ch, i64 K);

}  // namespace serial

}  // namespace hypermix::kernels

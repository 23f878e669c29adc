#pragma once

#include <cstdint>

// Arithmetic cost conventions. One multiply-add counts as 2, an elementwise
// nonlinearity as 1 per element, a softmax or layer norm as 5 per element
// (max/shift/exp/sum/divide resp. mean/var/normalize), affine adds 2. These
// helpers are the only place costs are written down: the ops charge them to
// the instrumentation counters and the closed-form per-module model sums
// the same terms, so the two agree exactly by construction unless the model
// stops mirroring what the code does.

namespace hypermix::flopcost {

using i64 = std::int64_t;

inline i64 matmul(i64 m, i64 k, i64 n) { return 2 * m * k * n; }
inline i64 bmm(i64 batch, i64 m, i64 k, i64 n) { return batch * matmul(m, k, n); }
inline i64 elementwise(i64 numel) { return numel; }
inline i64 softmax(i64 numel) { return 5 * numel; }
inline i64 log_softmax(i64 numel) { return 5 * numel; }
inline i64 layer_norm(i64 numel, bool affine) { return (affine ? 7 : 5) * numel; }
inline i64 glu(i64 out_numel) { return 2 * out_numel; }
inline i64 conv1d_depthwise(i64 n, i64 ch, i64 K) { return 2 * n * ch * K; }

// Linear layer y = xW + b on [rows x in] -> [rows x out].
inline i64 linear(i64 rows, i64 in, i64 out) { return matmul(rows, in, out) + rows * out; }

// Two conv stages (3x3, stride 2, valid, channels 1 -> c -> c, bias + GELU
// after each) followed by a linear projection of the flattened freq x channel
// axis. t1/f1 and t2/f2 are the stage output extents. The streaming kernel
// produces only the 2*t2+1 stage-1 rows stage 2 consumes, so the stage-1
// term bills that count, not t1 (they differ by one dangling row when t1 is
// even).
inline i64 frontend(i64 T, i64 F, i64 c, i64 d_model) {
    const i64 t1 = (T - 3) / 2 + 1;
    const i64 f1 = (F - 3) / 2 + 1;
    const i64 t2 = (t1 - 3) / 2 + 1;
    const i64 f2 = (f1 - 3) / 2 + 1;
    const i64 r1 = 2 * t2 + 1;
    const i64 stage1 = r1 * f1 * c * (2 * 9 * 1) + 2 * (r1 * f1 * c);  // conv + bias + gelu
    const i64 stage2 = t2 * f2 * c * (2 * 9 * c) + 2 * (t2 * f2 * c);
    const i64 proj = linear(t2, f2 * c, d_model);
    return stage1 + stage2 + proj;
}

}  // namespace hypermix::flopcost

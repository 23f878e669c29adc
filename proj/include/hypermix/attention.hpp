#pragma once

#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"

namespace hypermix {

// Multi-head self-attention over a [N, d] sequence. All k heads' score
// matrices are materialized together (one [k, N, N] tensor), the standard
// batched layout; this is what makes the quadratic memory term visible to
// the instrumentation.
struct MhsaParams {
    i64 d_model = 0;
    i64 heads = 0;
    Tensor wq, bq;  // [d, d], [d]
    Tensor wk, bk;
    Tensor wv, bv;
    Tensor wo, bo;

    static MhsaParams init(i64 d_model, i64 heads, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// Scaled dot-product attention for a single head: softmax(Q K^T / sqrt(dk)) V.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Full block: optional sinusoidal positions added to x before the Q/K/V
// projections (used when attention runs standalone; the encoder adds
// positions once at its input and passes add_positions = false).
Tensor mhsa_forward(const Tensor& x, const MhsaParams& p, bool add_positions,
                    const Tensor& pos_table);

// Closed-form forward cost; mirrors the op sequence of mhsa_forward.
i64 mhsa_flops(i64 n, i64 d_model, i64 heads, bool add_positions);

}  // namespace hypermix

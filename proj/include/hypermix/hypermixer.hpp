#pragma once

#include <utility>
#include <vector>

#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"

// Token mixing with input-dependent weights. A pair of small MLPs (the
// generators) maps each token's features, with positions added, to one row
// each of two mixing matrices W1, W2 in R^{N x d'}. The matrices drive a
// token-mixing MLP applied per feature column:
//
//   TM(X) = norm( W1 . GELU( W2^T . X ) )          X in R^{N x w}
//
// norm is a per-column normalization over the token axis (configurable:
// token axis, feature axis, or off; no learnable affine). W1/W2 are
// regenerated every forward pass and are not parameters themselves —
// gradients reach the generators through them.
//
// The multi-head variant runs one mixer per contiguous feature slice of
// width d/k with generator output width d'/k and concatenates the slices
// back; there is no output projection afterwards. Each head's generators
// see the matching column slice of the position table.
//
// Generators are untied by default (separate MLPs produce W1 and W2); the
// tied option shares one generator so W1 == W2, halving generator weights.

namespace hypermix {

inline constexpr double kLnEps = 1e-5;

// Token-axis normalization is the default; kNormOff disables it and
// kNormFeature normalizes each token row instead (ablation switches).
inline constexpr int kNormToken = 0;
inline constexpr int kNormFeature = 1;
inline constexpr int kNormOff = -1;

// One generator MLP: in -> in -> out with GELU, applied row-wise.
struct HyperNet {
    Tensor fc1, b1;  // [in, in], [in]
    Tensor fc2, b2;  // [in, out], [out]
    static HyperNet init(i64 in_width, i64 out_width, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// The generator pair behind one mixer. When tied, mlp1 produces both
// matrices and mlp2 stays empty.
struct GeneratorPair {
    HyperNet mlp1;
    HyperNet mlp2;
    bool tied = false;
    static GeneratorPair init(i64 in_width, i64 out_width, bool tied, Rng& rng);
    std::vector<Tensor> parameters() const;
};

struct MhhmParams {
    i64 d_model = 0;
    i64 heads = 0;
    i64 d_prime = 0;  // total generator output width across heads
    bool tied = false;
    int norm_axis = kNormToken;
    std::vector<GeneratorPair> gens;  // one per head, widths (d/k, d'/k)

    static MhhmParams init(i64 d_model, i64 heads, i64 d_prime, bool tied, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// The two mixing matrices for the current tokens: row j of each output is
// the generator applied to x_j (+ positions_j when given). positions may be
// null to skip the add. Tied pairs return the same tensor twice.
std::pair<Tensor, Tensor> generate_weights(const Tensor& x, const Tensor* positions,
                                           const GeneratorPair& gen);

// The token-mixing MLP on one feature slice given generated weights.
Tensor tm_mlp(const Tensor& x, const Tensor& w1, const Tensor& w2, int norm_axis);

// Single mixer over the full width: tm_mlp(x, generate_weights(x)).
Tensor hypermixer_forward(const Tensor& x, const GeneratorPair& gen, int norm_axis,
                          bool add_positions, const Tensor& pos_table);

// Multi-head pass: slice features, mix each slice with its own generated
// weights, concatenate. Positions feed the generators only.
Tensor mhhm_forward(const Tensor& x, const MhhmParams& p, bool add_positions,
                    const Tensor& pos_table);

// Arithmetic cost of mhhm_forward, split the way the scaling study reports
// it. Matches the instrumented counter of the forward pass exactly.
struct GiFlops {
    i64 generation = 0;  // position add + generator MLP passes
    i64 mixing = 0;      // W2^T X, GELU, W1 A  (the O(N d d'/k) term)
    i64 norm = 0;        // per-slice normalization
    i64 total() const { return generation + mixing + norm; }
};

GiFlops mhhm_flops(i64 n, i64 d_model, i64 heads, i64 d_prime, bool tied, int norm_axis,
                   bool add_positions);

}  // namespace hypermix

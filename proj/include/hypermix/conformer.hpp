#pragma once

#include <vector>

#include "hypermix/attention.hpp"
#include "hypermix/config.hpp"
#include "hypermix/hypermixer.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"

// Encoder blocks and the encoder stack. Two block styles share the same
// global-interaction (GI) contract R^{N x d} -> R^{N x d}:
//
//   conformer block:    x1 = x + 0.5*ffn1(x)
//                       x2 = x1 + GI(norm(x1))
//                       x3 = x2 + conv(x2)
//                       x4 = x3 + 0.5*ffn2(x3)
//                       out = norm(x4)
//   transformer block:  x1 = x + GI(norm(x))
//                       out = x1 + ffn(x1)
//
// The GI slot takes attention (quadratic in N) or the generated-weight token
// mixer (linear in N), or is skipped entirely for the local-only ablation.
// Sinusoidal positions are added once after the frontend; attention relies
// on that single injection, while the token mixer's generators additionally
// receive position slices every layer (they see no other position signal).
//
// The default frontend subsamples 80-dim feature frames by 4 with two 3x3
// stride-2 valid convolutions (channels 1 -> d -> d, bias + GELU each) and
// projects the flattened 19*d freq/channel axis to d. It runs as a fused
// streaming kernel: stage-1 rows live in a 3-row ring buffer and stage-2 +
// projection consume them row by row, so no [T/2, 39, d] intermediate is
// ever materialized — the backward pass recomputes rows instead
// (checkpoint style). This keeps the frontend's memory footprint flat and
// lets peak-memory comparisons between GI mechanisms show the mechanisms
// themselves. The toy frontend is a plain linear map (no subsampling) so
// frame labels stay aligned with input frames.

namespace hypermix {

enum class FrontendKind { ConvSubsample, Linear };

struct FrontendParams {
    FrontendKind kind = FrontendKind::ConvSubsample;
    // conv path (input [T, 80], output [subsampled_len(T), d]):
    Tensor w1, b1;          // [c, 3, 3], [c]   in-channels 1, c = d_model
    Tensor w2, b2;          // [c, c, 3, 3], [c]
    Tensor proj_w, proj_b;  // [19*c, d], [d]
    // linear path (input [T, in_dim], output [T, d]):
    Tensor lin_w, lin_b;  // [in_dim, d], [d]

    static FrontendParams init_conv(i64 d_model, Rng& rng);
    static FrontendParams init_linear(i64 in_dim, i64 d_model, Rng& rng);
    std::vector<Tensor> parameters() const;
};

Tensor frontend_forward(const Tensor& x, const FrontendParams& p);

struct FfnParams {
    Tensor ln_g, ln_b;  // pre-norm
    Tensor w1, b1;      // [d, d_ffn], [d_ffn]
    Tensor w2, b2;      // [d_ffn, d], [d]
    static FfnParams init(i64 d, i64 d_ffn, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// norm -> linear d -> d_ffn -> GELU -> linear d_ffn -> d (no residual).
Tensor ffn_module(const Tensor& x, const FfnParams& p);

struct ConvModuleParams {
    i64 kernel = 31;
    Tensor ln1_g, ln1_b;
    Tensor pw1_w, pw1_b;  // [d, 2d], [2d]
    Tensor dw_taps, dw_b; // [K, d], [d]
    Tensor ln2_g, ln2_b;
    Tensor pw2_w, pw2_b;  // [d, d], [d]
    static ConvModuleParams init(i64 d, i64 kernel, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// norm -> pointwise d->2d -> GLU -> depthwise(K) + bias -> norm -> Swish ->
// pointwise d->d (no residual). Receptive field exactly K.
Tensor conv_module(const Tensor& x, const ConvModuleParams& p);

struct GiParams {
    GiKind kind = GiKind::None;
    Tensor ln_g, ln_b;  // pre-norm (empty when kind == None)
    MhsaParams mhsa;
    MhhmParams mixer;
    static GiParams init(const EncoderConfig& cfg, GiKind kind, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// norm -> GI mechanism (identity-0 for None: returns x unchanged, no norm).
// Positions: attention assumes they were added at encoder input; the token
// mixer's generators get per-layer slices of pos_table.
Tensor gi_module(const Tensor& x, const GiParams& p, const Tensor& pos_table);

struct ConformerBlockParams {
    FfnParams ffn1, ffn2;
    GiParams gi;
    ConvModuleParams conv;
    Tensor out_ln_g, out_ln_b;
    static ConformerBlockParams init(const EncoderConfig& cfg, GiKind kind, Rng& rng);
    std::vector<Tensor> parameters() const;
};

Tensor conformer_block(const Tensor& x, const ConformerBlockParams& p, const Tensor& pos_table);

struct TransformerBlockParams {
    GiParams gi;
    FfnParams ffn;
    static TransformerBlockParams init(const EncoderConfig& cfg, GiKind kind, Rng& rng);
    std::vector<Tensor> parameters() const;
};

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p, const Tensor& pos_table);

struct EncoderParams {
    i64 d_model = 0;
    BlockStyle style = BlockStyle::Conformer;
    FrontendParams frontend;
    Tensor pos_table;  // [max_len, d], constant
    std::vector<ConformerBlockParams> cblocks;
    std::vector<TransformerBlockParams> tblocks;

    // Conv frontend; max_len bounds the sequence lengths this instance serves.
    static EncoderParams init(const EncoderConfig& cfg, ModelKind kind, i64 max_len, Rng& rng);
    // Toy variant: linear frontend on in_dim-wide frames, no subsampling.
    static EncoderParams init_toy(const EncoderConfig& cfg, ModelKind kind, i64 in_dim,
                                  i64 max_len, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// frontend -> add positions -> blocks.
Tensor encoder_forward(const Tensor& features, const EncoderParams& p);

// Closed-form cost mirrors of the forwards above (norms billed at 7/element
// with affine, GLU at 2/output element — the same constants the ops charge).
i64 ffn_module_flops(i64 n, i64 d, i64 d_ffn);
i64 conv_module_flops(i64 n, i64 d, i64 kernel);
i64 gi_module_flops(const EncoderConfig& cfg, GiKind kind, i64 n);  // incl. pre-norm

}  // namespace hypermix

#pragma once

#include <string>

#include "hypermix/tensor.hpp"

// Model shapes, presets, parameter accounting, and the closed-form cost
// model. The two presets mirror the reference recipes: width 144 ("small")
// and 256 ("medium"), 10 encoder layers, 8 heads, d_ffn = 4*d_model, the
// generator output width equal to d_ffn, depthwise kernel 31, a 5000-entry
// label inventory, and 4 decoder layers (decoder and embedding enter the
// accounting only; their forward pass is out of scope).

namespace hypermix {

enum class GiKind { Mhsa, Hypermixer, None };
enum class BlockStyle { Transformer, Conformer };

// The four benchmarked models plus the local-only ablation used in toy
// training. A model is a block style paired with a global-interaction kind.
enum class ModelKind { Transformer, Hypermixer, Conformer, Hyperconformer, ConvOnly };

BlockStyle block_style(ModelKind kind);
GiKind model_gi_kind(ModelKind kind);
std::string model_name(ModelKind kind);
ModelKind model_from_name(const std::string& name);  // throws ConfigError
std::string gi_kind_name(GiKind kind);

struct EncoderConfig {
    i64 d_model = 144;
    i64 n_layers = 10;
    i64 k = 8;  // heads, for both attention and token mixing
    i64 d_ffn = 576;
    i64 d_prime = 576;  // generator output width (total across heads)
    i64 kernel = 31;    // depthwise kernel, odd
    GiKind gi_kind = GiKind::Hypermixer;
    bool tied_hypernets = false;
    i64 vocab = 5000;           // accounting only (classifier head width)
    i64 n_decoder_layers = 4;   // accounting only
};

// Throws ConfigError on violated invariants (divisibility, odd kernel, ...).
void validate(const EncoderConfig& cfg);

EncoderConfig preset(const std::string& name);  // "small" | "medium"

// Flat `key = value` text, one pair per line, '#' comments; keys are exactly
// the EncoderConfig field names. Unknown key or bad value -> ConfigError.
// The result overlays `base` (pass a preset to override it).
EncoderConfig load_config_file(const std::string& path, const EncoderConfig& base);

enum class Scope { Encoder, Full };

// Closed-form parameter counts. Derivations (column-major weight tensors,
// biases everywhere, layer norms with gain+bias):
//   frontend        28d^2 + 12d     two 3x3 stride-2 convs (1->d->d) + flatten linear 19d->d
//   ffn module      2d + 2dd_ffn + d_ffn + d   (pre-norm + two linears)
//   conv module     3d^2 + (8+K)d   (pre-norm, expand x2, depthwise K + bias, norm, project)
//   attention GI    4d^2 + 4d
//   token-mix GI    (tied?1:2) * k * (dh^2 + dh + dh*dph + dph),  dh=d/k, dph=d'/k
//   conformer block ffn1 + ffn2 + conv + GI + 2d (GI pre-norm) + 2d (exit norm)
//   transformer blk GI + 2d (GI pre-norm) + ffn
//   decoder layer   self-attn 4d^2+4d, cross-attn 4d^2+4d, ffn 2dd_ffn+d+d_ffn, 3 norms 6d
//   embedding       vocab*d (tied with the decoder output head)
//   classifier head d*vocab + vocab (frame/sequence labeling head)
// Full scope = encoder + decoder layers + embedding + classifier head.
namespace paramcount {
i64 frontend(i64 d);
i64 ffn_module(i64 d, i64 d_ffn);
i64 conv_module(i64 d, i64 kernel);
i64 mhsa(i64 d);
i64 mhhm(i64 d, i64 k, i64 d_prime, bool tied);
i64 gi(const EncoderConfig& cfg, GiKind kind);
i64 block(const EncoderConfig& cfg, BlockStyle style, GiKind kind);
i64 encoder(const EncoderConfig& cfg, ModelKind kind);
i64 decoder_layer(i64 d, i64 d_ffn);
}  // namespace paramcount

i64 count_params(const EncoderConfig& cfg, ModelKind kind, Scope scope);

// Ground truth: instantiate the encoder and sum every parameter tensor.
// Equals count_params(cfg, kind, Scope::Encoder) exactly.
i64 count_params_instantiated(const EncoderConfig& cfg, ModelKind kind);

// Published targets for the full-scope counts, in parameters (not millions).
i64 param_target(ModelKind kind, const std::string& preset_name);  // 0 if none

// Percentage parameter reduction from running the token-mixing model with
// cfg.k heads instead of one head, all other fields fixed, full scope.
double head_reduction(const EncoderConfig& cfg, ModelKind kind);

// Closed-form cost of one encoder forward pass, bucketed by submodule.
// n_frames is the post-subsampling length; the conv frontend term assumes
// the canonical input length T = 4*n_frames + 3 (the exact preimage).
// Buckets: ffn includes the half-step scales and residual adds; gi includes
// its pre-norm and residual add; conv includes its residual add; other is
// the position add plus block exit norms. Sums match the instrumented
// counter of a real forward pass exactly.
struct FlopBreakdown {
    i64 frontend = 0;
    i64 gi = 0;
    i64 ffn = 0;
    i64 conv = 0;
    i64 other = 0;
    i64 total() const { return frontend + gi + ffn + conv + other; }
};

FlopBreakdown flop_model(const EncoderConfig& cfg, ModelKind kind, i64 n_frames);

// Post-subsampling length of the conv frontend: two valid 3-wide stride-2
// stages, so n = ((T-3)/2 + 1 -> (.-3)/2 + 1). Throws InputError for T < 8.
i64 subsampled_len(i64 t_in);

}  // namespace hypermix

#include "hypermix/conformer.hpp"

#include <cmath>
#include <functional>
#include <utility>

#include "hypermix/error.hpp"
#include "hypermix/flops.hpp"
#include "hypermix/instrumentation.hpp"
#include "hypermix/kernels.hpp"
#include "hypermix/ops.hpp"
#include "hypermix/positional.hpp"
#include "hypermix/tape.hpp"

namespace hypermix {

namespace fc = flopcost;
namespace kn = kernels;

namespace {

constexpr i64 kFreqIn = 80;   // input feature bins
constexpr i64 kFreq1 = 39;    // after stage 1: (80-3)/2+1
constexpr i64 kFreq2 = 19;    // after stage 2: (39-3)/2+1

void record(std::function<void()> fn) {
    if (Tape* t = Tape::active()) t->record(std::move(fn));
}

Tensor xavier(i64 fan_in, i64 fan_out, const std::vector<i64>& shape, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return Tensor::rand_uniform(shape, rng, -limit, limit);
}

void append(std::vector<Tensor>& dst, const std::vector<Tensor>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

i64 subsampled_len(i64 t_in) {
    if (t_in < 8) {
        throw InputError("frontend: need at least 8 input frames, got " + std::to_string(t_in));
    }
    const i64 t1 = (t_in - 3) / 2 + 1;
    return (t1 - 3) / 2 + 1;
}

// ---------------------------------------------------------------------------
// Frontend
// ---------------------------------------------------------------------------

FrontendParams FrontendParams::init_conv(i64 d_model, Rng& rng) {
    FrontendParams p;
    p.kind = FrontendKind::ConvSubsample;
    Rng r = rng.fork();
    p.w1 = xavier(9, 9 * d_model, {d_model, 3, 3}, r);
    p.b1 = Tensor::zeros({d_model});
    p.w2 = xavier(9 * d_model, 9 * d_model, {d_model, d_model, 3, 3}, r);
    p.b2 = Tensor::zeros({d_model});
    p.proj_w = xavier(kFreq2 * d_model, d_model, {kFreq2 * d_model, d_model}, r);
    p.proj_b = Tensor::zeros({d_model});
    return p;
}

FrontendParams FrontendParams::init_linear(i64 in_dim, i64 d_model, Rng& rng) {
    FrontendParams p;
    p.kind = FrontendKind::Linear;
    Rng r = rng.fork();
    p.lin_w = xavier(in_dim, d_model, {in_dim, d_model}, r);
    p.lin_b = Tensor::zeros({d_model});
    return p;
}

std::vector<Tensor> FrontendParams::parameters() const {
    if (kind == FrontendKind::Linear) return {lin_w, lin_b};
    return {w1, b1, w2, b2, proj_w, proj_b};
}

namespace {

// One stage-1 row r: z[f, ch] = b1[ch] + sum_{i,j} X[2r+i, 2f+j] * w1[ch,i,j],
// written as [kFreq1 * c] with channel minor. a (when non-null) gets GELU(z).
void stage1_row(const double* x, const double* w1, const double* b1, i64 c, i64 r, double* z,
                double* a) {
#pragma omp parallel for schedule(static)
    for (i64 idx = 0; idx < kFreq1 * c; ++idx) {
        const i64 f = idx / c;
        const i64 ch = idx % c;
        double acc = b1[ch];
        for (i64 i = 0; i < 3; ++i) {
            for (i64 j = 0; j < 3; ++j) {
                acc += x[(2 * r + i) * kFreqIn + 2 * f + j] * w1[ch * 9 + i * 3 + j];
            }
        }
        z[idx] = acc;
        if (a != nullptr) a[idx] = kn::gelu_scalar(acc);
    }
}

// One stage-2 row t from the three stage-1 rows (channel-minor [kFreq1 * c]).
void stage2_row(const double* row0, const double* row1, const double* row2, const double* w2,
                const double* b2, i64 c, double* z, double* a) {
    const double* rows[3] = {row0, row1, row2};
#pragma omp parallel for schedule(static)
    for (i64 idx = 0; idx < kFreq2 * c; ++idx) {
        const i64 g = idx / c;
        const i64 co = idx % c;
        double acc = b2[co];
        for (i64 ci = 0; ci < c; ++ci) {
            for (i64 i = 0; i < 3; ++i) {
                for (i64 j = 0; j < 3; ++j) {
                    acc += rows[i][(2 * g + j) * c + ci] * w2[((co * c + ci) * 3 + i) * 3 + j];
                }
            }
        }
        z[idx] = acc;
        if (a != nullptr) a[idx] = kn::gelu_scalar(acc);
    }
}

Tensor frontend_conv_forward(const Tensor& x, const FrontendParams& p) {
    if (x.ndim() != 2 || x.dim(1) != kFreqIn) {
        throw DimensionError("frontend: expects [T, 80] features, got " + shape_str(x.shape()));
    }
    const i64 T = x.dim(0);
    const i64 n = subsampled_len(T);  // throws for T < 8
    const i64 c = p.b1.dim(0);
    const i64 d = p.proj_b.dim(0);

    Tensor out = Tensor::uninit({n, d});
    {
        // Ring of the three stage-1 rows the current window needs; row r
        // lives in slot r % 3, already GELU-activated.
        Tensor ring = Tensor::uninit({3, kFreq1 * c});
        Tensor z_scratch = Tensor::uninit({kFreq1 * c});
        Tensor row2 = Tensor::uninit({kFreq2 * c});
        i64 ring_row[3] = {-1, -1, -1};

        const double* xd = x.data();
        const double* w1 = p.w1.data();
        const double* b1 = p.b1.data();
        const double* w2 = p.w2.data();
        const double* b2 = p.b2.data();
        const double* pw = p.proj_w.data();
        const double* pb = p.proj_b.data();
        double* od = out.mut();

        for (i64 t = 0; t < n; ++t) {
            for (i64 r = 2 * t; r <= 2 * t + 2; ++r) {
                double* slot = ring.mut() + (r % 3) * (kFreq1 * c);
                if (ring_row[r % 3] != r) {
                    stage1_row(xd, w1, b1, c, r, z_scratch.mut(), slot);
                    ring_row[r % 3] = r;
                }
            }
            stage2_row(ring.data() + (2 * t % 3) * (kFreq1 * c),
                       ring.data() + ((2 * t + 1) % 3) * (kFreq1 * c),
                       ring.data() + ((2 * t + 2) % 3) * (kFreq1 * c), w2, b2, c,
                       z_scratch.mut() /* unused z, reuse scratch */, row2.mut());
            // Projection row: y[t, :] = flat . proj_w + proj_b.
            const double* flat = row2.data();
#pragma omp parallel for schedule(static)
            for (i64 col = 0; col < d; ++col) {
                double acc = pb[col];
                for (i64 m = 0; m < kFreq2 * c; ++m) acc += flat[m] * pw[m * d + col];
                od[t * d + col] = acc;
            }
        }
    }
    count_flops(fc::frontend(T, kFreqIn, c, d));

    record([x, w1 = p.w1, b1 = p.b1, w2 = p.w2, b2 = p.b2, pw = p.proj_w, pb = p.proj_b, out, T, c,
            d, n]() {
        if (!out.grad_allocated()) return;
        const double* gy = out.grad_if();
        const double* xd = x.data();
        const double* w1d = w1.data();
        const double* w2d = w2.data();
        const double* pwd = pw.data();

        Tensor gxt = x, gw1t = w1, gb1t = b1, gw2t = w2, gb2t = b2, gpwt = pw, gpbt = pb;
        double* gx = gxt.grad();
        double* gw1 = gw1t.grad();
        double* gb1 = gb1t.grad();
        double* gw2 = gw2t.grad();
        double* gb2 = gb2t.grad();
        double* gpw = gpwt.grad();
        double* gpb = gpbt.grad();

        // Recompute rows instead of storing the stage-1 plane. Rows are
        // flushed (their stage-1 backward run) in strictly ascending order:
        // on eviction from the ring, then the final three after the loop.
        Tensor z1ring = Tensor::uninit({3, kFreq1 * c});
        Tensor a1ring = Tensor::uninit({3, kFreq1 * c});
        Tensor da1ring = Tensor::zeros({3, kFreq1 * c});
        i64 ring_row[3] = {-1, -1, -1};
        Tensor z2row = Tensor::uninit({kFreq2 * c});
        Tensor a2row = Tensor::uninit({kFreq2 * c});
        Tensor dz2row = Tensor::uninit({kFreq2 * c});

        auto flush_row = [&](i64 r) {
            const i64 slot = r % 3;
            const double* z1 = z1ring.data() + slot * (kFreq1 * c);
            const double* da1 = da1ring.data() + slot * (kFreq1 * c);
            for (i64 f = 0; f < kFreq1; ++f) {
                for (i64 ch = 0; ch < c; ++ch) {
                    const double dz1 = da1[f * c + ch] * kn::gelu_grad_scalar(z1[f * c + ch]);
                    if (dz1 == 0.0) continue;
                    gb1[ch] += dz1;
                    for (i64 i = 0; i < 3; ++i) {
                        for (i64 j = 0; j < 3; ++j) {
                            gw1[ch * 9 + i * 3 + j] += dz1 * xd[(2 * r + i) * kFreqIn + 2 * f + j];
                            gx[(2 * r + i) * kFreqIn + 2 * f + j] += dz1 * w1d[ch * 9 + i * 3 + j];
                        }
                    }
                }
            }
        };

        for (i64 t = 0; t < n; ++t) {
            for (i64 r = 2 * t; r <= 2 * t + 2; ++r) {
                const i64 slot = r % 3;
                if (ring_row[slot] != r) {
                    if (ring_row[slot] >= 0) flush_row(ring_row[slot]);
                    stage1_row(xd, w1d, b1.data(), c, r, z1ring.mut() + slot * (kFreq1 * c),
                               a1ring.mut() + slot * (kFreq1 * c));
                    double* da1 = da1ring.mut() + slot * (kFreq1 * c);
                    for (i64 i = 0; i < kFreq1 * c; ++i) da1[i] = 0.0;
                    ring_row[slot] = r;
                }
            }
            stage2_row(a1ring.data() + (2 * t % 3) * (kFreq1 * c),
                       a1ring.data() + ((2 * t + 1) % 3) * (kFreq1 * c),
                       a1ring.data() + ((2 * t + 2) % 3) * (kFreq1 * c), w2d, b2.data(), c,
                       z2row.mut(), a2row.mut());
            // Projection backward for this row: grads for proj and dflat.
            const double* gyt = gy + t * d;
            double* dz2 = dz2row.mut();
            for (i64 m = 0; m < kFreq2 * c; ++m) {
                double dflat = 0.0;
                const double a2m = a2row.data()[m];
                for (i64 col = 0; col < d; ++col) {
                    gpw[m * d + col] += a2m * gyt[col];
                    dflat += pwd[m * d + col] * gyt[col];
                }
                dz2[m] = dflat * kn::gelu_grad_scalar(z2row.data()[m]);
            }
            for (i64 col = 0; col < d; ++col) gpb[col] += gyt[col];
            // Stage-2 backward: bias, taps, and the stage-1 row grads.
            for (i64 g = 0; g < kFreq2; ++g) {
                for (i64 co = 0; co < c; ++co) {
                    const double dz = dz2[g * c + co];
                    if (dz == 0.0) continue;
                    gb2[co] += dz;
                    for (i64 ci = 0; ci < c; ++ci) {
                        for (i64 i = 0; i < 3; ++i) {
                            const double* a1 = a1ring.data() + ((2 * t + i) % 3) * (kFreq1 * c);
                            double* da1 = da1ring.mut() + ((2 * t + i) % 3) * (kFreq1 * c);
                            for (i64 j = 0; j < 3; ++j) {
                                const i64 widx = ((co * c + ci) * 3 + i) * 3 + j;
                                gw2[widx] += dz * a1[(2 * g + j) * c + ci];
                                da1[(2 * g + j) * c + ci] += dz * w2d[widx];
                            }
                        }
                    }
                }
            }
        }
        for (i64 r = 2 * (n - 1); r <= 2 * (n - 1) + 2; ++r) flush_row(r);

        // Recompute (one closed-form pass) plus roughly two reverse sweeps;
        // charged at the closed-form rate. Backward counts feed no
        // closed-form comparison, only the per-run totals.
        count_flops(3 * fc::frontend(T, kFreqIn, c, d));
    });
    return out;
}

}  // namespace

Tensor frontend_forward(const Tensor& x, const FrontendParams& p) {
    if (p.kind == FrontendKind::Linear) {
        if (x.ndim() != 2 || x.dim(1) != p.lin_w.dim(0)) {
            throw DimensionError("frontend: expects [T, " + std::to_string(p.lin_w.dim(0)) +
                                 "] features, got " + shape_str(x.shape()));
        }
        return ops::add_rowvec(ops::matmul(x, p.lin_w), p.lin_b);
    }
    return frontend_conv_forward(x, p);
}

// ---------------------------------------------------------------------------
// Feed-forward module
// ---------------------------------------------------------------------------

FfnParams FfnParams::init(i64 d, i64 d_ffn, Rng& rng) {
    FfnParams p;
    Rng r = rng.fork();
    p.ln_g = Tensor::full({d}, 1.0);
    p.ln_b = Tensor::zeros({d});
    p.w1 = xavier(d, d_ffn, {d, d_ffn}, r);
    p.b1 = Tensor::zeros({d_ffn});
    p.w2 = xavier(d_ffn, d, {d_ffn, d}, r);
    p.b2 = Tensor::zeros({d});
    return p;
}

std::vector<Tensor> FfnParams::parameters() const { return {ln_g, ln_b, w1, b1, w2, b2}; }

Tensor ffn_module(const Tensor& x, const FfnParams& p) {
    Tensor h = ops::layer_norm(x, 1, kLnEps, &p.ln_g, &p.ln_b);
    h = ops::gelu(ops::add_rowvec(ops::matmul(h, p.w1), p.b1));
    return ops::add_rowvec(ops::matmul(h, p.w2), p.b2);
}

i64 ffn_module_flops(i64 n, i64 d, i64 d_ffn) {
    return fc::layer_norm(n * d, true) + fc::linear(n, d, d_ffn) + fc::elementwise(n * d_ffn) +
           fc::linear(n, d_ffn, d);
}

// ---------------------------------------------------------------------------
// Convolution module
// ---------------------------------------------------------------------------

ConvModuleParams ConvModuleParams::init(i64 d, i64 kernel, Rng& rng) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw ConfigError("conv module: kernel must be odd and positive, got " +
                          std::to_string(kernel));
    }
    ConvModuleParams p;
    p.kernel = kernel;
    Rng r = rng.fork();
    p.ln1_g = Tensor::full({d}, 1.0);
    p.ln1_b = Tensor::zeros({d});
    p.pw1_w = xavier(d, 2 * d, {d, 2 * d}, r);
    p.pw1_b = Tensor::zeros({2 * d});
    p.dw_taps = xavier(kernel, kernel, {kernel, d}, r);
    p.dw_b = Tensor::zeros({d});
    p.ln2_g = Tensor::full({d}, 1.0);
    p.ln2_b = Tensor::zeros({d});
    p.pw2_w = xavier(d, d, {d, d}, r);
    p.pw2_b = Tensor::zeros({d});
    return p;
}

std::vector<Tensor> ConvModuleParams::parameters() const {
    return {ln1_g, ln1_b, pw1_w, pw1_b, dw_taps, dw_b, ln2_g, ln2_b, pw2_w, pw2_b};
}

Tensor conv_module(const Tensor& x, const ConvModuleParams& p) {
    Tensor h = ops::layer_norm(x, 1, kLnEps, &p.ln1_g, &p.ln1_b);
    h = ops::glu(ops::add_rowvec(ops::matmul(h, p.pw1_w), p.pw1_b));
    h = ops::add_rowvec(ops::conv1d_depthwise(h, p.dw_taps), p.dw_b);
    h = ops::swish(ops::layer_norm(h, 1, kLnEps, &p.ln2_g, &p.ln2_b));
    return ops::add_rowvec(ops::matmul(h, p.pw2_w), p.pw2_b);
}

i64 conv_module_flops(i64 n, i64 d, i64 kernel) {
    return fc::layer_norm(n * d, true) + fc::linear(n, d, 2 * d) + fc::glu(n * d) +
           fc::conv1d_depthwise(n, d, kernel) + fc::elementwise(n * d) /* depthwise bias */ +
           fc::layer_norm(n * d, true) + fc::elementwise(n * d) /* swish */ +
           fc::linear(n, d, d);
}

// ---------------------------------------------------------------------------
// Global interaction slot
// ---------------------------------------------------------------------------

GiParams GiParams::init(const EncoderConfig& cfg, GiKind kind, Rng& rng) {
    GiParams p;
    p.kind = kind;
    if (kind == GiKind::None) return p;
    p.ln_g = Tensor::full({cfg.d_model}, 1.0);
    p.ln_b = Tensor::zeros({cfg.d_model});
    if (kind == GiKind::Mhsa) {
        p.mhsa = MhsaParams::init(cfg.d_model, cfg.k, rng);
    } else {
        p.mixer = MhhmParams::init(cfg.d_model, cfg.k, cfg.d_prime, cfg.tied_hypernets, rng);
    }
    return p;
}

std::vector<Tensor> GiParams::parameters() const {
    if (kind == GiKind::None) return {};
    std::vector<Tensor> out = {ln_g, ln_b};
    if (kind == GiKind::Mhsa) {
        append(out, mhsa.parameters());
    } else {
        append(out, mixer.parameters());
    }
    return out;
}

Tensor gi_module(const Tensor& x, const GiParams& p, const Tensor& pos_table) {
    if (p.kind == GiKind::None) return x;
    Tensor h = ops::layer_norm(x, 1, kLnEps, &p.ln_g, &p.ln_b);
    if (p.kind == GiKind::Mhsa) {
        // Positions were added once at the encoder input.
        return mhsa_forward(h, p.mhsa, /*add_positions=*/false, pos_table);
    }
    // The generators consume fresh position slices every layer.
    return mhhm_forward(h, p.mixer, /*add_positions=*/true, pos_table);
}

i64 gi_module_flops(const EncoderConfig& cfg, GiKind kind, i64 n) {
    if (kind == GiKind::None) return 0;
    const i64 pre_norm = fc::layer_norm(n * cfg.d_model, true);
    if (kind == GiKind::Mhsa) {
        return pre_norm + mhsa_flops(n, cfg.d_model, cfg.k, /*add_positions=*/false);
    }
    return pre_norm + mhhm_flops(n, cfg.d_model, cfg.k, cfg.d_prime, cfg.tied_hypernets,
                                 kNormToken, /*add_positions=*/true)
                          .total();
}

// ---------------------------------------------------------------------------
// Blocks
// ---------------------------------------------------------------------------

ConformerBlockParams ConformerBlockParams::init(const EncoderConfig& cfg, GiKind kind, Rng& rng) {
    ConformerBlockParams p;
    p.ffn1 = FfnParams::init(cfg.d_model, cfg.d_ffn, rng);
    p.gi = GiParams::init(cfg, kind, rng);
    p.conv = ConvModuleParams::init(cfg.d_model, cfg.kernel, rng);
    p.ffn2 = FfnParams::init(cfg.d_model, cfg.d_ffn, rng);
    p.out_ln_g = Tensor::full({cfg.d_model}, 1.0);
    p.out_ln_b = Tensor::zeros({cfg.d_model});
    return p;
}

std::vector<Tensor> ConformerBlockParams::parameters() const {
    std::vector<Tensor> out;
    append(out, ffn1.parameters());
    append(out, gi.parameters());
    append(out, conv.parameters());
    append(out, ffn2.parameters());
    out.push_back(out_ln_g);
    out.push_back(out_ln_b);
    return out;
}

Tensor conformer_block(const Tensor& x, const ConformerBlockParams& p, const Tensor& pos_table) {
    Tensor x1 = ops::add(x, ops::scale(ffn_module(x, p.ffn1), 0.5));
    Tensor x2 = p.gi.kind == GiKind::None ? x1 : ops::add(x1, gi_module(x1, p.gi, pos_table));
    Tensor x3 = ops::add(x2, conv_module(x2, p.conv));
    Tensor x4 = ops::add(x3, ops::scale(ffn_module(x3, p.ffn2), 0.5));
    return ops::layer_norm(x4, 1, kLnEps, &p.out_ln_g, &p.out_ln_b);
}

TransformerBlockParams TransformerBlockParams::init(const EncoderConfig& cfg, GiKind kind,
                                                    Rng& rng) {
    TransformerBlockParams p;
    p.gi = GiParams::init(cfg, kind, rng);
    p.ffn = FfnParams::init(cfg.d_model, cfg.d_ffn, rng);
    return p;
}

std::vector<Tensor> TransformerBlockParams::parameters() const {
    std::vector<Tensor> out = gi.parameters();
    append(out, ffn.parameters());
    return out;
}

Tensor transformer_block(const Tensor& x, const TransformerBlockParams& p,
                         const Tensor& pos_table) {
    Tensor x1 = p.gi.kind == GiKind::None ? x : ops::add(x, gi_module(x, p.gi, pos_table));
    return ops::add(x1, ffn_module(x1, p.ffn));
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

namespace {

EncoderParams init_encoder(const EncoderConfig& cfg, ModelKind kind, FrontendParams frontend,
                           i64 max_len, Rng& rng) {
    validate(cfg);
    EncoderParams p;
    p.d_model = cfg.d_model;
    p.style = block_style(kind);
    p.frontend = std::move(frontend);
    p.pos_table = sinusoid_table(max_len, cfg.d_model);
    const GiKind gi = model_gi_kind(kind);
    for (i64 l = 0; l < cfg.n_layers; ++l) {
        if (p.style == BlockStyle::Conformer) {
            p.cblocks.push_back(ConformerBlockParams::init(cfg, gi, rng));
        } else {
            p.tblocks.push_back(TransformerBlockParams::init(cfg, gi, rng));
        }
    }
    return p;
}

}  // namespace

EncoderParams EncoderParams::init(const EncoderConfig& cfg, ModelKind kind, i64 max_len,
                                  Rng& rng) {
    return init_encoder(cfg, kind, FrontendParams::init_conv(cfg.d_model, rng), max_len, rng);
}

EncoderParams EncoderParams::init_toy(const EncoderConfig& cfg, ModelKind kind, i64 in_dim,
                                      i64 max_len, Rng& rng) {
    return init_encoder(cfg, kind, FrontendParams::init_linear(in_dim, cfg.d_model, rng), max_len,
                        rng);
}

std::vector<Tensor> EncoderParams::parameters() const {
    std::vector<Tensor> out = frontend.parameters();
    for (const auto& b : cblocks) append(out, b.parameters());
    for (const auto& b : tblocks) append(out, b.parameters());
    return out;
}

Tensor encoder_forward(const Tensor& features, const EncoderParams& p) {
    Tensor h = frontend_forward(features, p.frontend);
    h = ops::add(h, position_rows(p.pos_table, h.dim(0)));
    if (p.style == BlockStyle::Conformer) {
        for (const auto& b : p.cblocks) h = conformer_block(h, b, p.pos_table);
    } else {
        for (const auto& b : p.tblocks) h = transformer_block(h, b, p.pos_table);
    }
    return h;
}

}  // namespace hypermix

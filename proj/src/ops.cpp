#include "hypermix/ops.hpp"

#include <cmath>
#include <limits>

#include "hypermix/error.hpp"
#include "hypermix/flops.hpp"
#include "hypermix/instrumentation.hpp"
#include "hypermix/kernels.hpp"

namespace hypermix::ops {

namespace {

namespace kn = hypermix::kernels;
namespace fc = hypermix::flopcost;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()) + " differ");
    }
}

void record(std::function<void()> fn) {
    if (Tape* t = Tape::active()) t->record(std::move(fn));
}

// grad(dst) += src (a plain tensor holding the contribution)
void accum_grad(Tensor dst, const Tensor& src) {
    kn::axpy(1.0, src.data(), dst.grad(), dst.numel());
}

// Decompose shape into (outer, len, inner) around `axis`.
struct AxisView {
    i64 outer = 1;
    i64 len = 1;
    i64 inner = 1;
};

AxisView axis_view(const Tensor& x, i64 axis, const char* op) {
    if (axis < 0 || axis >= x.ndim()) {
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for shape " + shape_str(x.shape()));
    }
    AxisView v;
    for (i64 i = 0; i < axis; ++i) v.outer *= x.dim(i);
    v.len = x.dim(axis);
    for (i64 i = axis + 1; i < x.ndim(); ++i) v.inner *= x.dim(i);
    return v;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = Tensor::uninit(a.shape());
    kn::add(a.data(), b.data(), out.mut(), out.numel());
    count_flops(fc::elementwise(out.numel()));
    record([a, b, out]() {
        if (!out.grad_allocated()) return;
        Tensor ga = a, gb = b;
        kn::axpy(1.0, out.grad_if(), ga.grad(), ga.numel());
        kn::axpy(1.0, out.grad_if(), gb.grad(), gb.numel());
        count_flops(2 * fc::elementwise(out.numel()));
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = Tensor::uninit(a.shape());
    kn::sub(a.data(), b.data(), out.mut(), out.numel());
    count_flops(fc::elementwise(out.numel()));
    record([a, b, out]() {
        if (!out.grad_allocated()) return;
        Tensor ga = a, gb = b;
        kn::axpy(1.0, out.grad_if(), ga.grad(), ga.numel());
        kn::axpy(-1.0, out.grad_if(), gb.grad(), gb.numel());
        count_flops(2 * fc::elementwise(out.numel()));
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = Tensor::uninit(a.shape());
    kn::mul(a.data(), b.data(), out.mut(), out.numel());
    count_flops(fc::elementwise(out.numel()));
    record([a, b, out]() {
        if (!out.grad_allocated()) return;
        const i64 n = out.numel();
        Tensor scratch = Tensor::uninit(out.shape());
        Tensor ga = a, gb = b;
        kn::mul(out.grad_if(), b.data(), scratch.mut(), n);
        kn::axpy(1.0, scratch.data(), ga.grad(), n);
        kn::mul(out.grad_if(), a.data(), scratch.mut(), n);
        kn::axpy(1.0, scratch.data(), gb.grad(), n);
        count_flops(4 * fc::elementwise(n));
    });
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = Tensor::uninit(a.shape());
    kn::scale(a.data(), s, out.mut(), out.numel());
    count_flops(fc::elementwise(out.numel()));
    record([a, s, out]() {
        if (!out.grad_allocated()) return;
        Tensor ga = a;
        kn::axpy(s, out.grad_if(), ga.grad(), ga.numel());
        count_flops(fc::elementwise(out.numel()));
    });
    return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    if (x.ndim() < 1 || v.ndim() != 1 || x.dim(x.ndim() - 1) != v.dim(0)) {
        throw DimensionError("add_rowvec: " + shape_str(x.shape()) + " + " + shape_str(v.shape()));
    }
    const i64 cols = v.dim(0);
    const i64 rows = x.numel() / cols;
    Tensor out = Tensor::uninit(x.shape());
    kn::add_rowvec(x.data(), v.data(), out.mut(), rows, cols);
    count_flops(fc::elementwise(out.numel()));
    record([x, v, out, rows, cols]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x, gv = v;
        kn::axpy(1.0, out.grad_if(), gx.grad(), gx.numel());
        Tensor csum = Tensor::uninit({cols});
        kn::colsum(out.grad_if(), csum.mut(), rows, cols);
        kn::axpy(1.0, csum.data(), gv.grad(), cols);
        count_flops(2 * fc::elementwise(out.numel()));
    });
    return out;
}

namespace {

// Shared by matmul and bmm: accumulate input grads for one batch slice.
void matmul_backward_slice(const double* a, const double* b, const double* g,
                           double* da, double* db, i64 m, i64 k, i64 n, bool ta,
                           bool tb) {
    // Scratch for products that land transposed relative to storage.
    if (!ta && !tb) {
        Tensor sa = Tensor::uninit({m, k});
        kn::matmul(g, b, sa.mut(), m, n, k, false, true);
        kn::axpy(1.0, sa.data(), da, m * k);
        Tensor sb = Tensor::uninit({k, n});
        kn::matmul(a, g, sb.mut(), k, m, n, true, false);
        kn::axpy(1.0, sb.data(), db, k * n);
    } else if (!ta && tb) {
        Tensor sa = Tensor::uninit({m, k});
        kn::matmul(g, b, sa.mut(), m, n, k, false, false);
        kn::axpy(1.0, sa.data(), da, m * k);
        Tensor sb = Tensor::uninit({n, k});
        kn::matmul(g, a, sb.mut(), n, m, k, true, false);
        kn::axpy(1.0, sb.data(), db, n * k);
    } else if (ta && !tb) {
        Tensor sa = Tensor::uninit({k, m});
        kn::matmul(b, g, sa.mut(), k, n, m, false, true);
        kn::axpy(1.0, sa.data(), da, k * m);
        Tensor sb = Tensor::uninit({k, n});
        kn::matmul(a, g, sb.mut(), k, m, n, false, false);
        kn::axpy(1.0, sb.data(), db, k * n);
    } else {
        Tensor p = Tensor::uninit({m, k});
        kn::matmul(g, b, p.mut(), m, n, k, false, false);
        Tensor sa = Tensor::uninit({k, m});
        kn::transpose2d(p.data(), sa.mut(), m, k);
        kn::axpy(1.0, sa.data(), da, k * m);
        Tensor q = Tensor::uninit({k, n});
        kn::matmul(a, g, q.mut(), k, m, n, false, false);
        Tensor sb = Tensor::uninit({n, k});
        kn::transpose2d(q.data(), sb.mut(), k, n);
        kn::axpy(1.0, sb.data(), db, n * k);
    }
    count_flops(2 * fc::matmul(m, k, n) + 2 * (m * k + k * n));
}

void check_matmul_dims(const Tensor& a, const Tensor& b, bool ta, bool tb, i64 offset,
                       const char* op) {
    const i64 ka = ta ? a.dim(offset) : a.dim(offset + 1);
    const i64 kb = tb ? b.dim(offset + 1) : b.dim(offset);
    if (ka != kb) {
        throw DimensionError(std::string(op) + ": inner extents disagree, lhs " +
                             shape_str(a.shape()) + (ta ? "^T" : "") + " rhs " +
                             shape_str(b.shape()) + (tb ? "^T" : ""));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw DimensionError("matmul: expects 2-D operands, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    check_matmul_dims(a, b, ta, tb, 0, "matmul");
    const i64 m = ta ? a.dim(1) : a.dim(0);
    const i64 k = ta ? a.dim(0) : a.dim(1);
    const i64 n = tb ? b.dim(0) : b.dim(1);
    Tensor out = Tensor::uninit({m, n});
    kn::matmul(a.data(), b.data(), out.mut(), m, k, n, ta, tb);
    count_flops(fc::matmul(m, k, n));
    record([a, b, out, m, k, n, ta, tb]() {
        if (!out.grad_allocated()) return;
        Tensor ga = a, gb = b;
        matmul_backward_slice(a.data(), b.data(), out.grad_if(), ga.grad(), gb.grad(), m, k, n, ta,
                              tb);
    });
    return out;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool ta, bool tb) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0)) {
        throw DimensionError("bmm: expects matching 3-D operands, got " + shape_str(a.shape()) +
                             " and " + shape_str(b.shape()));
    }
    check_matmul_dims(a, b, ta, tb, 1, "bmm");
    const i64 batch = a.dim(0);
    const i64 m = ta ? a.dim(2) : a.dim(1);
    const i64 k = ta ? a.dim(1) : a.dim(2);
    const i64 n = tb ? b.dim(1) : b.dim(2);
    Tensor out = Tensor::uninit({batch, m, n});
    kn::bmm(a.data(), b.data(), out.mut(), batch, m, k, n, ta, tb);
    count_flops(fc::bmm(batch, m, k, n));
    record([a, b, out, batch, m, k, n, ta, tb]() {
        if (!out.grad_allocated()) return;
        Tensor ga = a, gb = b;
        for (i64 bi = 0; bi < batch; ++bi) {
            matmul_backward_slice(a.data() + bi * m * k, b.data() + bi * k * n,
                                  out.grad_if() + bi * m * n,
                                  ga.grad() + bi * m * k, gb.grad() + bi * k * n, m, k, n, ta, tb);
        }
    });
    return out;
}

Tensor transpose(const Tensor& x) {
    if (x.ndim() != 2) throw DimensionError("transpose: expects 2-D, got " + shape_str(x.shape()));
    const i64 r = x.dim(0);
    const i64 c = x.dim(1);
    Tensor out = Tensor::uninit({c, r});
    kn::transpose2d(x.data(), out.mut(), r, c);
    record([x, out, r, c]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        Tensor scratch = Tensor::uninit({r, c});
        kn::transpose2d(out.grad_if(), scratch.mut(), c, r);
        kn::axpy(1.0, scratch.data(), gx.grad(), r * c);
    });
    return out;
}

Tensor heads_split(const Tensor& x, i64 k) {
    if (x.ndim() != 2 || x.dim(1) % k != 0) {
        throw DimensionError("heads_split: " + shape_str(x.shape()) + " into " + std::to_string(k) +
                             " heads");
    }
    const i64 n = x.dim(0);
    const i64 dk = x.dim(1) / k;
    Tensor out = Tensor::uninit({k, n, dk});
    kn::heads_split(x.data(), out.mut(), n, k, dk);
    record([x, out, n, k, dk]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        Tensor scratch = Tensor::uninit({n, k * dk});
        kn::heads_merge(out.grad_if(), scratch.mut(), n, k, dk);
        kn::axpy(1.0, scratch.data(), gx.grad(), gx.numel());
    });
    return out;
}

Tensor heads_merge(const Tensor& x) {
    if (x.ndim() != 3) throw DimensionError("heads_merge: expects 3-D, got " + shape_str(x.shape()));
    const i64 k = x.dim(0);
    const i64 n = x.dim(1);
    const i64 dk = x.dim(2);
    Tensor out = Tensor::uninit({n, k * dk});
    kn::heads_merge(x.data(), out.mut(), n, k, dk);
    record([x, out, n, k, dk]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        Tensor scratch = Tensor::uninit({k, n, dk});
        kn::heads_split(out.grad_if(), scratch.mut(), n, k, dk);
        kn::axpy(1.0, scratch.data(), gx.grad(), gx.numel());
    });
    return out;
}

Tensor softmax(const Tensor& x, i64 axis) {
    const AxisView v = axis_view(x, axis, "softmax");
    Tensor out = Tensor::uninit(x.shape());
    kn::softmax_lanes(x.data(), out.mut(), v.outer, v.len, v.inner);
    count_flops(fc::softmax(x.numel()));
    record([x, out, v]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        const double* y = out.data();
        const double* g = out.grad_if();
        double* dx = gx.grad();
        const i64 lanes = v.outer * v.inner;
#pragma omp parallel for schedule(static)
        for (i64 lane = 0; lane < lanes; ++lane) {
            const i64 o = lane / v.inner;
            const i64 in = lane % v.inner;
            const i64 base = o * v.len * v.inner + in;
            double dot = 0.0;
            for (i64 l = 0; l < v.len; ++l) {
                const i64 idx = base + l * v.inner;
                dot += g[idx] * y[idx];
            }
            for (i64 l = 0; l < v.len; ++l) {
                const i64 idx = base + l * v.inner;
                dx[idx] += y[idx] * (g[idx] - dot);
            }
        }
        count_flops(4 * fc::elementwise(out.numel()));
    });
    return out;
}

Tensor log_softmax(const Tensor& x, i64 axis) {
    const AxisView v = axis_view(x, axis, "log_softmax");
    Tensor out = Tensor::uninit(x.shape());
    const double* xd = x.data();
    double* od = out.mut();
    const i64 lanes = v.outer * v.inner;
#pragma omp parallel for schedule(static)
    for (i64 lane = 0; lane < lanes; ++lane) {
        const i64 o = lane / v.inner;
        const i64 in = lane % v.inner;
        const i64 base = o * v.len * v.inner + in;
        double mx = -std::numeric_limits<double>::infinity();
        for (i64 l = 0; l < v.len; ++l) mx = std::max(mx, xd[base + l * v.inner]);
        double sum = 0.0;
        for (i64 l = 0; l < v.len; ++l) sum += std::exp(xd[base + l * v.inner] - mx);
        const double lse = mx + std::log(sum);
        for (i64 l = 0; l < v.len; ++l) od[base + l * v.inner] = xd[base + l * v.inner] - lse;
    }
    count_flops(fc::log_softmax(x.numel()));
    record([x, out, v]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        const double* y = out.data();
        const double* g = out.grad_if();
        double* dx = gx.grad();
        const i64 lanes2 = v.outer * v.inner;
#pragma omp parallel for schedule(static)
        for (i64 lane = 0; lane < lanes2; ++lane) {
            const i64 o = lane / v.inner;
            const i64 in = lane % v.inner;
            const i64 base = o * v.len * v.inner + in;
            double gsum = 0.0;
            for (i64 l = 0; l < v.len; ++l) gsum += g[base + l * v.inner];
            for (i64 l = 0; l < v.len; ++l) {
                const i64 idx = base + l * v.inner;
                dx[idx] += g[idx] - std::exp(y[idx]) * gsum;
            }
        }
        count_flops(4 * fc::elementwise(out.numel()));
    });
    return out;
}

Tensor layer_norm(const Tensor& x, i64 axis, double eps, const Tensor* gain, const Tensor* bias) {
    const AxisView v = axis_view(x, axis, "layer_norm");
    const bool affine = gain != nullptr;
    if (affine != (bias != nullptr)) throw ConfigError("layer_norm: gain and bias come together");
    if (affine && (gain->numel() != v.len || bias->numel() != v.len)) {
        throw DimensionError("layer_norm: affine params " + shape_str(gain->shape()) + "/" +
                             shape_str(bias->shape()) + " for axis length " + std::to_string(v.len));
    }
    Tensor out = Tensor::uninit(x.shape());
    Tensor mean = Tensor::uninit({v.outer * v.inner});
    Tensor rstd = Tensor::uninit({v.outer * v.inner});
    kn::layernorm_lanes(x.data(), out.mut(), v.outer, v.len, v.inner, eps,
                        affine ? gain->data() : nullptr, affine ? bias->data() : nullptr,
                        mean.mut(), rstd.mut());
    count_flops(fc::layer_norm(x.numel(), affine));

    Tensor gain_t = affine ? *gain : Tensor();
    Tensor bias_t = affine ? *bias : Tensor();
    record([x, out, mean, rstd, gain_t, bias_t, v, affine]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        const double* xd = x.data();
        const double* g = out.grad_if();
        const double* mu = mean.data();
        const double* rs = rstd.data();
        double* dx = gx.grad();
        const double inv_len = 1.0 / static_cast<double>(v.len);
        const i64 lanes = v.outer * v.inner;

        if (affine) {
            Tensor gcopy = gain_t;  // non-const handles for grad access
            Tensor bcopy = bias_t;
            double* dgain = gcopy.grad();
            double* dbias = bcopy.grad();
            // Affine grads accumulate across lanes; keep this loop serial so
            // the summation order is fixed.
            for (i64 lane = 0; lane < lanes; ++lane) {
                const i64 o = lane / v.inner;
                const i64 in = lane % v.inner;
                const i64 base = o * v.len * v.inner + in;
                for (i64 l = 0; l < v.len; ++l) {
                    const i64 idx = base + l * v.inner;
                    const double xhat = (xd[idx] - mu[lane]) * rs[lane];
                    dgain[l] += g[idx] * xhat;
                    dbias[l] += g[idx];
                }
            }
        }
        const double* gaind = affine ? gain_t.data() : nullptr;
#pragma omp parallel for schedule(static)
        for (i64 lane = 0; lane < lanes; ++lane) {
            const i64 o = lane / v.inner;
            const i64 in = lane % v.inner;
            const i64 base = o * v.len * v.inner + in;
            double mean_gy = 0.0;
            double mean_gyx = 0.0;
            for (i64 l = 0; l < v.len; ++l) {
                const i64 idx = base + l * v.inner;
                const double gy = affine ? g[idx] * gaind[l] : g[idx];
                const double xhat = (xd[idx] - mu[lane]) * rs[lane];
                mean_gy += gy;
                mean_gyx += gy * xhat;
            }
            mean_gy *= inv_len;
            mean_gyx *= inv_len;
            for (i64 l = 0; l < v.len; ++l) {
                const i64 idx = base + l * v.inner;
                const double gy = affine ? g[idx] * gaind[l] : g[idx];
                const double xhat = (xd[idx] - mu[lane]) * rs[lane];
                dx[idx] += rs[lane] * (gy - mean_gy - xhat * mean_gyx);
            }
        }
        count_flops((affine ? 12 : 8) * fc::elementwise(out.numel()));
    });
    return out;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Bwd bwd) {
    Tensor out = Tensor::uninit(x.shape());
    fwd(x.data(), out.mut(), x.numel());
    count_flops(fc::elementwise(x.numel()));
    record([x, out, bwd]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        Tensor scratch = Tensor::uninit(x.shape());
        bwd(x.data(), out.grad_if(), scratch.mut(), x.numel());
        kn::axpy(1.0, scratch.data(), gx.grad(), x.numel());
        count_flops(2 * fc::elementwise(x.numel()));
    });
    return out;
}

}  // namespace

Tensor gelu(const Tensor& x) {
    return unary_elementwise(
        x, [](const double* a, double* o, i64 n) { kn::gelu(a, o, n); },
        [](const double* a, const double* g, double* o, i64 n) { kn::gelu_backward(a, g, o, n); });
}

Tensor swish(const Tensor& x) {
    return unary_elementwise(
        x, [](const double* a, double* o, i64 n) { kn::swish(a, o, n); },
        [](const double* a, const double* g, double* o, i64 n) { kn::swish_backward(a, g, o, n); });
}

Tensor sigmoid(const Tensor& x) {
    return unary_elementwise(
        x, [](const double* a, double* o, i64 n) { kn::sigmoid(a, o, n); },
        [](const double* a, const double* g, double* o, i64 n) {
#pragma omp parallel for schedule(static)
            for (i64 i = 0; i < n; ++i) {
                const double s = kn::sigmoid_scalar(a[i]);
                o[i] = g[i] * s * (1.0 - s);
            }
        });
}

Tensor glu(const Tensor& x) {
    const i64 last = x.ndim() - 1;
    if (x.ndim() < 1 || x.dim(last) % 2 != 0) {
        throw DimensionError("glu: trailing axis must be even, got " + shape_str(x.shape()));
    }
    const i64 w = x.dim(last) / 2;
    const i64 rows = x.numel() / (2 * w);
    std::vector<i64> oshape = x.shape();
    oshape[static_cast<size_t>(last)] = w;
    Tensor out = Tensor::uninit(oshape);
    Tensor sig = Tensor::uninit(oshape);  // stashed for backward
    const double* xd = x.data();
    double* od = out.mut();
    double* sd = sig.mut();
#pragma omp parallel for schedule(static)
    for (i64 r = 0; r < rows; ++r) {
        const double* a = xd + r * 2 * w;
        const double* b = a + w;
        for (i64 c = 0; c < w; ++c) {
            const double s = kn::sigmoid_scalar(b[c]);
            sd[r * w + c] = s;
            od[r * w + c] = a[c] * s;
        }
    }
    count_flops(fc::glu(out.numel()));
    record([x, out, sig, rows, w]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        const double* xd2 = x.data();
        const double* g = out.grad_if();
        const double* s = sig.data();
        double* dx = gx.grad();
#pragma omp parallel for schedule(static)
        for (i64 r = 0; r < rows; ++r) {
            const double* a = xd2 + r * 2 * w;
            double* da = dx + r * 2 * w;
            double* db = da + w;
            for (i64 c = 0; c < w; ++c) {
                const i64 idx = r * w + c;
                da[c] += g[idx] * s[idx];
                db[c] += g[idx] * a[c] * s[idx] * (1.0 - s[idx]);
            }
        }
        count_flops(5 * fc::elementwise(out.numel()));
    });
    return out;
}

Tensor conv1d_depthwise(const Tensor& x, const Tensor& taps) {
    if (x.ndim() != 2 || taps.ndim() != 2 || x.dim(1) != taps.dim(1)) {
        throw DimensionError("conv1d_depthwise: input " + shape_str(x.shape()) + " taps " +
                             shape_str(taps.shape()));
    }
    if (taps.dim(0) % 2 == 0) {
        throw ConfigError("conv1d_depthwise: kernel size " + std::to_string(taps.dim(0)) +
                          " must be odd");
    }
    const i64 n = x.dim(0);
    const i64 ch = x.dim(1);
    const i64 K = taps.dim(0);
    Tensor out = Tensor::uninit({n, ch});
    kn::conv1d_depthwise(x.data(), taps.data(), out.mut(), n, ch, K);
    count_flops(fc::conv1d_depthwise(n, ch, K));
    record([x, taps, out, n, ch, K]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x, gt = taps;
        Tensor sx = Tensor::uninit({n, ch});
        kn::conv1d_depthwise_dx(out.grad_if(), taps.data(), sx.mut(), n, ch, K);
        kn::axpy(1.0, sx.data(), gx.grad(), n * ch);
        Tensor st = Tensor::uninit({K, ch});
        kn::conv1d_depthwise_dw(x.data(), out.grad_if(), st.mut(), n, ch, K);
        kn::axpy(1.0, st.data(), gt.grad(), K * ch);
        count_flops(2 * fc::conv1d_depthwise(n, ch, K));
    });
    return out;
}

Tensor sum_all(const Tensor& x) {
    Tensor out = Tensor::uninit({1});
    const double* xd = x.data();
    double acc = 0.0;
    for (i64 i = 0; i < x.numel(); ++i) acc += xd[i];
    out.mut()[0] = acc;
    count_flops(fc::elementwise(x.numel()));
    record([x, out]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        const double g = out.grad_if()[0];
        double* dx = gx.grad();
        const i64 n = gx.numel();
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < n; ++i) dx[i] += g;
        count_flops(fc::elementwise(n));
    });
    return out;
}

Tensor nll_rows(const Tensor& logp, const std::vector<i64>& labels) {
    if (logp.ndim() != 2 || static_cast<i64>(labels.size()) != logp.dim(0)) {
        throw DimensionError("nll_rows: logp " + shape_str(logp.shape()) + " with " +
                             std::to_string(labels.size()) + " labels");
    }
    const i64 n = logp.dim(0);
    const i64 c = logp.dim(1);
    for (i64 t = 0; t < n; ++t) {
        if (labels[static_cast<size_t>(t)] < 0 || labels[static_cast<size_t>(t)] >= c) {
            throw InputError("nll_rows: label " + std::to_string(labels[static_cast<size_t>(t)]) +
                             " outside [0, " + std::to_string(c) + ") at row " + std::to_string(t));
        }
    }
    Tensor out = Tensor::uninit({1});
    const double* lp = logp.data();
    double acc = 0.0;
    for (i64 t = 0; t < n; ++t) acc -= lp[t * c + labels[static_cast<size_t>(t)]];
    out.mut()[0] = acc / static_cast<double>(n);
    count_flops(fc::elementwise(n));
    record([logp, labels, out, n, c]() {
        if (!out.grad_allocated()) return;
        Tensor gl = logp;
        const double g = out.grad_if()[0] / static_cast<double>(n);
        double* dx = gl.grad();
        for (i64 t = 0; t < n; ++t) dx[t * c + labels[static_cast<size_t>(t)]] -= g;
        count_flops(fc::elementwise(n));
    });
    return out;
}

Tensor slice_cols(const Tensor& x, i64 c0, i64 width) {
    if (x.ndim() != 2 || c0 < 0 || width < 1 || c0 + width > x.dim(1)) {
        throw DimensionError("slice_cols: [" + std::to_string(c0) + ", " +
                             std::to_string(c0 + width) + ") of " + shape_str(x.shape()));
    }
    const i64 rows = x.dim(0);
    const i64 cols = x.dim(1);
    Tensor out = Tensor::uninit({rows, width});
    kn::copy_cols(x.data(), out.mut(), rows, cols, c0, width);
    record([x, out, rows, cols, c0, width]() {
        if (!out.grad_allocated()) return;
        Tensor gx = x;
        kn::accum_cols(out.grad_if(), gx.grad(), rows, cols, c0, width);
    });
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const i64 rows = parts[0].dim(0);
    i64 cols = 0;
    for (const Tensor& p : parts) {
        if (p.ndim() != 2 || p.dim(0) != rows) {
            throw DimensionError("concat_cols: row counts differ, " + shape_str(parts[0].shape()) +
                                 " vs " + shape_str(p.shape()));
        }
        cols += p.dim(1);
    }
    Tensor out = Tensor::uninit({rows, cols});
    double* od = out.mut();
    i64 c0 = 0;
    for (const Tensor& p : parts) {
        const i64 w = p.dim(1);
        const double* pd = p.data();
#pragma omp parallel for schedule(static)
        for (i64 r = 0; r < rows; ++r) {
            double* dst = od + r * cols + c0;
            const double* src = pd + r * w;
            for (i64 cc = 0; cc < w; ++cc) dst[cc] = src[cc];
        }
        c0 += w;
    }
    record([parts, out, rows, cols]() {
        if (!out.grad_allocated()) return;
        i64 off = 0;
        for (const Tensor& p : parts) {
            Tensor gp = p;
            const i64 w = p.dim(1);
            Tensor scratch = Tensor::uninit({rows, w});
            kn::copy_cols(out.grad_if(), scratch.mut(), rows, cols, off, w);
            kn::axpy(1.0, scratch.data(), gp.grad(), rows * w);
            off += w;
        }
    });
    return out;
}

}  // namespace hypermix::ops

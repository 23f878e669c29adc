#include "hypermix/kernels.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace hypermix::kernels {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_grad_scalar(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return cdf + x * pdf;
}

double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double swish_scalar(double x) { return x * sigmoid_scalar(x); }

double swish_grad_scalar(double x) {
    const double s = sigmoid_scalar(x);
    return s + x * s * (1.0 - s);
}

// Row-parallel matmul. Every C[i,j] accumulates over the shared dimension in
// ascending order regardless of variant, so results match the serial
// reference bitwise.
void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n,
            bool ta, bool tb) {
    if (!ta && !tb) {
        // C[i,:] += A[i,l] * B[l,:], axpy form: contiguous B rows.
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (i64 j = 0; j < n; ++j) crow[j] = 0.0;
            const double* arow = a + i * k;
            for (i64 l = 0; l < k; ++l) {
                const double av = arow[l];
                const double* brow = b + l * n;
                for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else if (!ta && tb) {
        // C[i,j] = dot(A[i,:], B[j,:]); both rows contiguous.
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < m; ++i) {
            const double* arow = a + i * k;
            double* crow = c + i * n;
            for (i64 j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (i64 l = 0; l < k; ++l) acc += arow[l] * brow[l];
                crow[j] = acc;
            }
        }
    } else if (ta && !tb) {
        // A is stored k x m; C[i,:] += A[l,i] * B[l,:].
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (i64 j = 0; j < n; ++j) crow[j] = 0.0;
            for (i64 l = 0; l < k; ++l) {
                const double av = a[l * m + i];
                const double* brow = b + l * n;
                for (i64 j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        // A stored k x m, B stored n x k.
#pragma omp parallel for schedule(static)
        for (i64 i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (i64 j = 0; j < n; ++j) {
                const double* brow = b + j * k;
                double acc = 0.0;
                for (i64 l = 0; l < k; ++l) acc += a[l * m + i] * brow[l];
                crow[j] = acc;
            }
        }
    }
}

void bmm(const double* a, const double* b, double* c, i64 batch, i64 m, i64 k,
         i64 n, bool ta, bool tb) {
    const i64 sa = m * k;
    const i64 sb = k * n;
    const i64 sc = m * n;
    for (i64 bi = 0; bi < batch; ++bi) {
        matmul(a + bi * sa, b + bi * sb, c + bi * sc, m, k, n, ta, tb);
    }
}

void add(const double* a, const double* b, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(double alpha, const double* x, double* y, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gelu(const double* x, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = gelu_scalar(x[i]);
}

void gelu_backward(const double* x, const double* g, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = g[i] * gelu_grad_scalar(x[i]);
}

void swish(const double* x, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = swish_scalar(x[i]);
}

void swish_backward(const double* x, const double* g, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = g[i] * swish_grad_scalar(x[i]);
}

void sigmoid(const double* x, double* out, i64 n) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n; ++i) out[i] = sigmoid_scalar(x[i]);
}

// Each lane is handled by one thread start to finish: reductions never split
// across threads, which keeps results independent of the thread count.
void softmax_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner) {
    const i64 lanes = outer * inner;
#pragma omp parallel for schedule(static)
    for (i64 lane = 0; lane < lanes; ++lane) {
        const i64 o = lane / inner;
        const i64 in = lane % inner;
        const double* xl = x + o * len * inner + in;
        double* ol = out + o * len * inner + in;
        double mx = -std::numeric_limits<double>::infinity();
        for (i64 l = 0; l < len; ++l) mx = xl[l * inner] > mx ? xl[l * inner] : mx;
        double sum = 0.0;
        for (i64 l = 0; l < len; ++l) {
            const double e = std::exp(xl[l * inner] - mx);
            ol[l * inner] = e;
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (i64 l = 0; l < len; ++l) ol[l * inner] *= inv;
    }
}

void layernorm_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner,
                     double eps, const double* gain, const double* bias,
                     double* mean_out, double* rstd_out) {
    const i64 lanes = outer * inner;
#pragma omp parallel for schedule(static)
    for (i64 lane = 0; lane < lanes; ++lane) {
        const i64 o = lane / inner;
        const i64 in = lane % inner;
        const double* xl = x + o * len * inner + in;
        double* ol = out + o * len * inner + in;
        double mean = 0.0;
        for (i64 l = 0; l < len; ++l) mean += xl[l * inner];
        mean /= static_cast<double>(len);
        double var = 0.0;
        for (i64 l = 0; l < len; ++l) {
            const double d = xl[l * inner] - mean;
            var += d * d;
        }
        var /= static_cast<double>(len);
        const double rstd = 1.0 / std::sqrt(var + eps);
        if (mean_out) mean_out[lane] = mean;
        if (rstd_out) rstd_out[lane] = rstd;
        if (gain && bias) {
            for (i64 l = 0; l < len; ++l)
                ol[l * inner] = (xl[l * inner] - mean) * rstd * gain[l] + bias[l];
        } else {
            for (i64 l = 0; l < len; ++l) ol[l * inner] = (xl[l * inner] - mean) * rstd;
        }
    }
}

void add_rowvec(const double* x, const double* v, double* out, i64 rows, i64 cols) {
#pragma omp parallel for schedule(static)
    for (i64 r = 0; r < rows; ++r) {
        const double* xr = x + r * cols;
        double* or_ = out + r * cols;
        for (i64 c = 0; c < cols; ++c) or_[c] = xr[c] + v[c];
    }
}

void colsum(const double* x, double* v, i64 rows, i64 cols) {
#pragma omp parallel for schedule(static)
    for (i64 c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (i64 r = 0; r < rows; ++r) acc += x[r * cols + c];
        v[c] = acc;
    }
}

void conv1d_depthwise(const double* x, const double* w, double* out, i64 n,
                      i64 ch, i64 K) {
    const i64 r = (K - 1) / 2;
#pragma omp parallel for schedule(static)
    for (i64 t = 0; t < n; ++t) {
        double* orow = out + t * ch;
        for (i64 c = 0; c < ch; ++c) orow[c] = 0.0;
        for (i64 j = 0; j < K; ++j) {
            const i64 src = t + j - r;
            if (src < 0 || src >= n) continue;
            const double* xrow = x + src * ch;
            const double* wrow = w + j * ch;
            for (i64 c = 0; c < ch; ++c) orow[c] += xrow[c] * wrow[c];
        }
    }
}

void conv1d_depthwise_dx(const double* g, const double* w, double* dx, i64 n,
                         i64 ch, i64 K) {
    const i64 r = (K - 1) / 2;
#pragma omp parallel for schedule(static)
    for (i64 t = 0; t < n; ++t) {
        double* drow = dx + t * ch;
        for (i64 c = 0; c < ch; ++c) drow[c] = 0.0;
        // x[t] feeds out[t + r - j] through tap j.
        for (i64 j = 0; j < K; ++j) {
            const i64 dst = t + r - j;
            if (dst < 0 || dst >= n) continue;
            const double* grow = g + dst * ch;
            const double* wrow = w + j * ch;
            for (i64 c = 0; c < ch; ++c) drow[c] += grow[c] * wrow[c];
        }
    }
}

void conv1d_depthwise_dw(const double* x, const double* g, double* dw, i64 n,
                         i64 ch, i64 K) {
    const i64 r = (K - 1) / 2;
#pragma omp parallel for schedule(static)
    for (i64 j = 0; j < K; ++j) {
        double* wrow = dw + j * ch;
        for (i64 c = 0; c < ch; ++c) wrow[c] = 0.0;
        for (i64 t = 0; t < n; ++t) {
            const i64 src = t + j - r;
            if (src < 0 || src >= n) continue;
            const double* xrow = x + src * ch;
            const double* grow = g + t * ch;
            for (i64 c = 0; c < ch; ++c) wrow[c] += grow[c] * xrow[c];
        }
    }
}

void transpose2d(const double* x, double* out, i64 rows, i64 cols) {
#pragma omp parallel for schedule(static)
    for (i64 r = 0; r < rows; ++r) {
        for (i64 c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
    }
}

void heads_split(const double* x, double* out, i64 n, i64 k, i64 dk) {
#pragma omp parallel for schedule(static)
    for (i64 t = 0; t < n; ++t) {
        for (i64 h = 0; h < k; ++h) {
            const double* src = x + t * k * dk + h * dk;
            double* dst = out + (h * n + t) * dk;
            for (i64 c = 0; c < dk; ++c) dst[c] = src[c];
        }
    }
}

void heads_merge(const double* x, double* out, i64 n, i64 k, i64 dk) {
#pragma omp parallel for schedule(static)
    for (i64 t = 0; t < n; ++t) {
        for (i64 h = 0; h < k; ++h) {
            const double* src = x + (h * n + t) * dk;
            double* dst = out + t * k * dk + h * dk;
            for (i64 c = 0; c < dk; ++c) dst[c] = src[c];
        }
    }
}

void copy_cols(const double* x, double* out, i64 rows, i64 cols, i64 c0, i64 width) {
#pragma omp parallel for schedule(static)
    for (i64 r = 0; r < rows; ++r) {
        const double* src = x + r * cols + c0;
        double* dst = out + r * width;
        for (i64 c = 0; c < width; ++c) dst[c] = src[c];
    }
}

void accum_cols(const double* src, double* dst, i64 rows, i64 cols, i64 c0, i64 width) {
#pragma omp parallel for schedule(static)
    for (i64 r = 0; r < rows; ++r) {
        const double* s = src + r * width;
        double* d = dst + r * cols + c0;
        for (i64 c = 0; c < width; ++c) d[c] += s[c];
    }
}

}  // namespace hypermix::kernels

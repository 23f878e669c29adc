#include "hypermix/kernels.hpp"

#include <cmath>
#include <limits>

// Plain-loop reference implementations. Deliberately written in the naive
// dot-product style rather than sharing code with the parallel variants, so
// a bug in one is visible against the other. Accumulation order over the
// reduced dimension is ascending in both, hence bit-identical outputs.

namespace hypermix::kernels::serial {

void matmul(const double* a, const double* b, double* c, i64 m, i64 k, i64 n,
            bool ta, bool tb) {
    for (i64 i = 0; i < m; ++i) {
        for (i64 j = 0; j < n; ++j) {
            double acc = 0.0;
            for (i64 l = 0; l < k; ++l) {
                const double av = ta ? a[l * m + i] : a[i * k + l];
                const double bv = tb ? b[j * k + l] : b[l * n + j];
                acc += av * bv;
            }
            c[i * n + j] = acc;
        }
    }
}

void bmm(const double* a, const double* b, double* c, i64 batch, i64 m, i64 k,
         i64 n, bool ta, bool tb) {
    for (i64 bi = 0; bi < batch; ++bi) {
        matmul(a + bi * m * k, b + bi * k * n, c + bi * m * n, m, k, n, ta, tb);
    }
}

void gelu(const double* x, double* out, i64 n) {
    for (i64 i = 0; i < n; ++i) out[i] = gelu_scalar(x[i]);
}

void softmax_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner) {
    for (i64 o = 0; o < outer; ++o) {
        for (i64 in = 0; in < inner; ++in) {
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
}

void layernorm_lanes(const double* x, double* out, i64 outer, i64 len, i64 inner,
                     double eps, const double* gain, const double* bias,
                     double* mean_out, double* rstd_out) {
    for (i64 o = 0; o < outer; ++o) {
        for (i64 in = 0; in < inner; ++in) {
            const i64 lane = o * inner + in;
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
            for (i64 l = 0; l < len; ++l) {
                double v = (xl[l * inner] - mean) * rstd;
                if (gain && bias) v = v * gain[l] + bias[l];
                ol[l * inner] = v;
            }
        }
    }
}

void conv1d_depthwise(const double* x, const double* w, double* out, i64 n,
                      i64 ch, i64 K) {
    const i64 r = (K - 1) / 2;
    for (i64 t = 0; t < n; ++t) {
        for (i64 c = 0; c < ch; ++c) {
            double acc = 0.0;
            for (i64 j = 0; j < K; ++j) {
                const i64 src = t + j - r;
                if (src < 0 || src >= n) continue;
                acc += x[src * ch + c] * w[j * ch + c];
            }
            out[t * ch + c] = acc;
        }
    }
}

}  // namespace hypermix::kernels::serial

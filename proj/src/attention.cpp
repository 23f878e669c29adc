#include "hypermix/attention.hpp"

#include <cmath>

#include "hypermix/error.hpp"
#include "hypermix/flops.hpp"
#include "hypermix/ops.hpp"
#include "hypermix/positional.hpp"

namespace hypermix {

namespace {

Tensor xavier(i64 fan_in, i64 fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return Tensor::rand_uniform({fan_in, fan_out}, rng, -limit, limit);
}

}  // namespace

MhsaParams MhsaParams::init(i64 d_model, i64 heads, Rng& rng) {
    if (heads < 1 || d_model % heads != 0) {
        throw ConfigError("mhsa: " + std::to_string(heads) + " heads do not divide width " +
                          std::to_string(d_model));
    }
    MhsaParams p;
    p.d_model = d_model;
    p.heads = heads;
    Rng r = rng.fork();
    p.wq = xavier(d_model, d_model, r);
    p.bq = Tensor::zeros({d_model});
    p.wk = xavier(d_model, d_model, r);
    p.bk = Tensor::zeros({d_model});
    p.wv = xavier(d_model, d_model, r);
    p.bv = Tensor::zeros({d_model});
    p.wo = xavier(d_model, d_model, r);
    p.bo = Tensor::zeros({d_model});
    return p;
}

std::vector<Tensor> MhsaParams::parameters() const {
    return {wq, bq, wk, bk, wv, bv, wo, bo};
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.ndim() != 2 || q.shape() != k.shape() || k.dim(0) != v.dim(0)) {
        throw DimensionError("attention: q " + shape_str(q.shape()) + " k " + shape_str(k.shape()) +
                             " v " + shape_str(v.shape()));
    }
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor scores = ops::scale(ops::matmul(q, k, false, true), inv_sqrt_dk);
    Tensor probs = ops::softmax(scores, 1);
    return ops::matmul(probs, v);
}

Tensor mhsa_forward(const Tensor& x, const MhsaParams& p, bool add_positions,
                    const Tensor& pos_table) {
    if (x.ndim() != 2 || x.dim(1) != p.d_model) {
        throw DimensionError("mhsa: input " + shape_str(x.shape()) + " for width " +
                             std::to_string(p.d_model));
    }
    const i64 n = x.dim(0);
    const i64 dk = p.d_model / p.heads;

    Tensor xin = x;
    if (add_positions) xin = ops::add(x, position_rows(pos_table, n));

    Tensor q = ops::add_rowvec(ops::matmul(xin, p.wq), p.bq);
    Tensor k = ops::add_rowvec(ops::matmul(xin, p.wk), p.bk);
    Tensor v = ops::add_rowvec(ops::matmul(xin, p.wv), p.bv);

    Tensor qh = ops::heads_split(q, p.heads);
    Tensor kh = ops::heads_split(k, p.heads);
    Tensor vh = ops::heads_split(v, p.heads);

    Tensor probs;
    {
        // Scores live only inside this scope; probs is the surviving [k,N,N].
        Tensor scaled =
            ops::scale(ops::bmm(qh, kh, false, true), 1.0 / std::sqrt(static_cast<double>(dk)));
        probs = ops::softmax(scaled, 2);
    }
    Tensor mixed = ops::bmm(probs, vh);
    Tensor merged = ops::heads_merge(mixed);
    return ops::add_rowvec(ops::matmul(merged, p.wo), p.bo);
}

i64 mhsa_flops(i64 n, i64 d_model, i64 heads, bool add_positions) {
    namespace fc = flopcost;
    const i64 dk = d_model / heads;
    i64 total = 0;
    if (add_positions) total += fc::elementwise(n * d_model);
    total += 4 * fc::linear(n, d_model, d_model);     // q, k, v, output
    total += fc::bmm(heads, n, dk, n);                // scores
    total += fc::elementwise(heads * n * n);          // 1/sqrt(dk)
    total += fc::softmax(heads * n * n);
    total += fc::bmm(heads, n, n, dk);                // probs . v
    return total;
}

}  // namespace hypermix

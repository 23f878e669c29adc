#include "hypermix/hypermixer.hpp"

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

void check_norm_axis(int norm_axis) {
    if (norm_axis != kNormToken && norm_axis != kNormFeature && norm_axis != kNormOff) {
        throw ConfigError("token mixing: norm axis must be 0 (token), 1 (feature) or -1 (off), got " +
                          std::to_string(norm_axis));
    }
}

}  // namespace

HyperNet HyperNet::init(i64 in_width, i64 out_width, Rng& rng) {
    HyperNet net;
    Rng r = rng.fork();
    net.fc1 = xavier(in_width, in_width, r);
    net.b1 = Tensor::zeros({in_width});
    net.fc2 = xavier(in_width, out_width, r);
    net.b2 = Tensor::zeros({out_width});
    return net;
}

std::vector<Tensor> HyperNet::parameters() const { return {fc1, b1, fc2, b2}; }

GeneratorPair GeneratorPair::init(i64 in_width, i64 out_width, bool tied, Rng& rng) {
    GeneratorPair gen;
    gen.tied = tied;
    gen.mlp1 = HyperNet::init(in_width, out_width, rng);
    if (!tied) gen.mlp2 = HyperNet::init(in_width, out_width, rng);
    return gen;
}

std::vector<Tensor> GeneratorPair::parameters() const {
    std::vector<Tensor> out = mlp1.parameters();
    if (!tied) {
        auto ps = mlp2.parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

MhhmParams MhhmParams::init(i64 d_model, i64 heads, i64 d_prime, bool tied, Rng& rng) {
    if (heads < 1 || d_model % heads != 0 || d_prime % heads != 0) {
        throw ConfigError("token mixing: " + std::to_string(heads) + " heads must divide width " +
                          std::to_string(d_model) + " and generator width " +
                          std::to_string(d_prime));
    }
    MhhmParams p;
    p.d_model = d_model;
    p.heads = heads;
    p.d_prime = d_prime;
    p.tied = tied;
    const i64 dh = d_model / heads;
    const i64 dph = d_prime / heads;
    for (i64 h = 0; h < heads; ++h) p.gens.push_back(GeneratorPair::init(dh, dph, tied, rng));
    return p;
}

std::vector<Tensor> MhhmParams::parameters() const {
    std::vector<Tensor> out;
    for (const auto& gen : gens) {
        auto ps = gen.parameters();
        out.insert(out.end(), ps.begin(), ps.end());
    }
    return out;
}

namespace {

Tensor run_generator(const Tensor& x_in, const HyperNet& net) {
    Tensor h = ops::gelu(ops::add_rowvec(ops::matmul(x_in, net.fc1), net.b1));
    return ops::add_rowvec(ops::matmul(h, net.fc2), net.b2);
}

}  // namespace

std::pair<Tensor, Tensor> generate_weights(const Tensor& x, const Tensor* positions,
                                           const GeneratorPair& gen) {
    if (x.ndim() != 2 || x.dim(1) != gen.mlp1.fc1.dim(0)) {
        throw DimensionError("weight generation: input " + shape_str(x.shape()) +
                             " for generator width " + std::to_string(gen.mlp1.fc1.dim(0)));
    }
    Tensor x_in = positions != nullptr ? ops::add(x, *positions) : x;
    Tensor w1 = run_generator(x_in, gen.mlp1);
    Tensor w2 = gen.tied ? w1 : run_generator(x_in, gen.mlp2);
    return {w1, w2};
}

Tensor tm_mlp(const Tensor& x, const Tensor& w1, const Tensor& w2, int norm_axis) {
    check_norm_axis(norm_axis);
    if (x.ndim() != 2 || w1.ndim() != 2 || w1.shape() != w2.shape() || w1.dim(0) != x.dim(0)) {
        throw DimensionError("tm_mlp: x " + shape_str(x.shape()) + " w1 " + shape_str(w1.shape()) +
                             " w2 " + shape_str(w2.shape()));
    }
    Tensor hidden = ops::matmul(w2, x, /*ta=*/true);  // [d', w]
    Tensor act = ops::gelu(hidden);
    Tensor pre = ops::matmul(w1, act);  // [N, w]
    if (norm_axis == kNormOff) return pre;
    return ops::layer_norm(pre, norm_axis, kLnEps);
}

Tensor hypermixer_forward(const Tensor& x, const GeneratorPair& gen, int norm_axis,
                          bool add_positions, const Tensor& pos_table) {
    Tensor pos;
    const Tensor* pp = nullptr;
    if (add_positions) {
        pos = position_rows(pos_table, x.dim(0));
        pp = &pos;
    }
    auto [w1, w2] = generate_weights(x, pp, gen);
    return tm_mlp(x, w1, w2, norm_axis);
}

Tensor mhhm_forward(const Tensor& x, const MhhmParams& p, bool add_positions,
                    const Tensor& pos_table) {
    if (x.ndim() != 2 || x.dim(1) != p.d_model) {
        throw DimensionError("token mixing: input " + shape_str(x.shape()) + " for width " +
                             std::to_string(p.d_model));
    }
    const i64 n = x.dim(0);
    const i64 dh = p.d_model / p.heads;

    Tensor x_pos;
    if (add_positions) x_pos = ops::add(x, position_rows(pos_table, n));

    std::vector<Tensor> mixed;
    mixed.reserve(static_cast<size_t>(p.heads));
    for (i64 h = 0; h < p.heads; ++h) {
        Tensor x_h = ops::slice_cols(x, h * dh, dh);
        Tensor gen_in = add_positions ? ops::slice_cols(x_pos, h * dh, dh) : x_h;
        auto [w1, w2] = generate_weights(gen_in, nullptr, p.gens[static_cast<size_t>(h)]);
        mixed.push_back(tm_mlp(x_h, w1, w2, p.norm_axis));
    }
    if (p.heads == 1) return mixed.front();
    return ops::concat_cols(mixed);
}

GiFlops mhhm_flops(i64 n, i64 d_model, i64 heads, i64 d_prime, bool tied, int norm_axis,
                   bool add_positions) {
    namespace fc = flopcost;
    const i64 dh = d_model / heads;
    const i64 dph = d_prime / heads;

    GiFlops f;
    if (add_positions) f.generation += fc::elementwise(n * d_model);
    const i64 per_net = fc::linear(n, dh, dh) + fc::elementwise(n * dh) + fc::linear(n, dh, dph);
    f.generation += heads * (tied ? 1 : 2) * per_net;

    f.mixing = heads * (fc::matmul(dph, n, dh)       // hidden = W2^T X
                        + fc::elementwise(dph * dh)  // GELU
                        + fc::matmul(n, dph, dh));   // W1 . act
    f.norm = norm_axis == kNormOff ? 0 : heads * fc::layer_norm(n * dh, false);
    return f;
}

}  // namespace hypermix

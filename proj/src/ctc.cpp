#include "hypermix/ctc.hpp"

#include <cmath>
#include <limits>

#include "hypermix/error.hpp"
#include "hypermix/instrumentation.hpp"
#include "hypermix/tape.hpp"

namespace hypermix {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double lse3(double a, double b, double c) { return lse2(lse2(a, b), c); }

void record(std::function<void()> fn) {
    if (Tape* t = Tape::active()) t->record(std::move(fn));
}

// Extended label: blanks interleaved, ext[2i+1] = targets[i], ext[2i] = 0.
i64 ext_label(const std::vector<i64>& targets, i64 s) {
    return s % 2 == 1 ? targets[static_cast<size_t>(s / 2)] : 0;
}

}  // namespace

Tensor ctc_loss(const Tensor& log_probs, const std::vector<i64>& targets) {
    if (log_probs.ndim() != 2 || log_probs.dim(1) < 2) {
        throw DimensionError("ctc: log_probs must be [N, classes >= 2], got " +
                             shape_str(log_probs.shape()));
    }
    const i64 n = log_probs.dim(0);
    const i64 classes = log_probs.dim(1);
    const i64 len = static_cast<i64>(targets.size());

    for (i64 t : targets) {
        if (t < 1 || t >= classes) {
            throw InputError("ctc: label " + std::to_string(t) + " outside 1.." +
                             std::to_string(classes - 1));
        }
    }
    const double* lp = log_probs.data();
    for (i64 t = 0; t < n; ++t) {
        double mass = 0.0;
        for (i64 c = 0; c < classes; ++c) mass += std::exp(lp[t * classes + c]);
        if (std::abs(mass - 1.0) > 1e-9) {
            throw InputError("ctc: row " + std::to_string(t) +
                             " is not a log-softmax output (exp-sum " + std::to_string(mass) + ")");
        }
    }
    i64 repeats = 0;
    for (i64 i = 1; i < len; ++i) {
        if (targets[static_cast<size_t>(i)] == targets[static_cast<size_t>(i - 1)]) ++repeats;
    }
    if (n < len + repeats) {
        throw InfeasibleError("ctc: " + std::to_string(n) + " frames cannot emit " +
                              std::to_string(len) + " labels with " + std::to_string(repeats) +
                              " adjacent repeats");
    }

    const i64 s_len = 2 * len + 1;
    // alpha[t][s]: log probability of consuming frames 0..t and sitting in
    // extended state s (emission at t included).
    Tensor alpha = Tensor::full({n, s_len}, kNegInf);
    double* al = alpha.mut();

    al[0] = lp[0];  // blank
    if (s_len > 1) al[1] = lp[ext_label(targets, 1)];
    for (i64 t = 1; t < n; ++t) {
        for (i64 s = 0; s < s_len; ++s) {
            const i64 lab = ext_label(targets, s);
            double acc = al[(t - 1) * s_len + s];
            if (s >= 1) acc = lse2(acc, al[(t - 1) * s_len + s - 1]);
            if (s >= 2 && lab != 0 && lab != ext_label(targets, s - 2)) {
                acc = lse2(acc, al[(t - 1) * s_len + s - 2]);
            }
            al[t * s_len + s] = acc == kNegInf ? kNegInf : acc + lp[t * classes + lab];
        }
    }
    double log_total = al[(n - 1) * s_len + s_len - 1];
    if (s_len > 1) log_total = lse2(log_total, al[(n - 1) * s_len + s_len - 2]);

    Tensor out = Tensor::scalar(-log_total);
    // Roughly one 3-way log-sum-exp (~10 flops) per lattice cell.
    count_flops(10 * n * s_len);

    record([log_probs, targets, alpha, out, n, classes, s_len, log_total]() {
        if (!out.grad_allocated()) return;
        const double g = out.grad_if()[0];
        const double* lp = log_probs.data();
        const double* al = alpha.data();
        Tensor glp_t = log_probs;
        double* glp = glp_t.grad();

        // beta[t][s]: log probability of the suffix after frame t given
        // state s at t (emission at t excluded), so alpha + beta is the log
        // mass of all alignments through (t, s).
        std::vector<double> beta(static_cast<size_t>(n) * s_len, kNegInf);
        beta[static_cast<size_t>((n - 1) * s_len + s_len - 1)] = 0.0;
        if (s_len > 1) beta[static_cast<size_t>((n - 1) * s_len + s_len - 2)] = 0.0;
        for (i64 t = n - 2; t >= 0; --t) {
            for (i64 s = 0; s < s_len; ++s) {
                double acc = beta[static_cast<size_t>((t + 1) * s_len + s)] +
                             lp[(t + 1) * classes + ext_label(targets, s)];
                if (s + 1 < s_len) {
                    acc = lse2(acc, beta[static_cast<size_t>((t + 1) * s_len + s + 1)] +
                                        lp[(t + 1) * classes + ext_label(targets, s + 1)]);
                }
                if (s + 2 < s_len && ext_label(targets, s + 2) != 0 &&
                    ext_label(targets, s + 2) != ext_label(targets, s)) {
                    acc = lse2(acc, beta[static_cast<size_t>((t + 1) * s_len + s + 2)] +
                                        lp[(t + 1) * classes + ext_label(targets, s + 2)]);
                }
                beta[static_cast<size_t>(t * s_len + s)] = acc;
            }
        }
        for (i64 t = 0; t < n; ++t) {
            for (i64 s = 0; s < s_len; ++s) {
                const double joint = al[t * s_len + s] + beta[static_cast<size_t>(t * s_len + s)];
                if (joint == kNegInf) continue;
                glp[t * classes + ext_label(targets, s)] -= g * std::exp(joint - log_total);
            }
        }
        count_flops(20 * n * s_len);
    });
    return out;
}

std::vector<i64> greedy_decode(const Tensor& log_probs) {
    if (log_probs.ndim() != 2) {
        throw DimensionError("decode: log_probs must be 2-D, got " + shape_str(log_probs.shape()));
    }
    const i64 n = log_probs.dim(0);
    const i64 classes = log_probs.dim(1);
    const double* lp = log_probs.data();
    std::vector<i64> out;
    i64 prev = 0;
    for (i64 t = 0; t < n; ++t) {
        i64 best = 0;
        for (i64 c = 1; c < classes; ++c) {
            if (lp[t * classes + c] > lp[t * classes + best]) best = c;
        }
        if (best != 0 && best != prev) out.push_back(best);
        prev = best;
    }
    return out;
}

}  // namespace hypermix

#include "hypermix/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hypermix/ctc.hpp"
#include "hypermix/error.hpp"
#include "hypermix/ops.hpp"
#include "hypermix/tape.hpp"

namespace hypermix {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
        v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    }
}

void Adam::zero_grads() {
    for (Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
    ++t_;
    double lr = cfg_.lr;
    if (cfg_.warmup_steps > 0 && t_ <= cfg_.warmup_steps) {
        lr = cfg_.lr * static_cast<double>(t_) / static_cast<double>(cfg_.warmup_steps);
    }
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.grad_allocated()) continue;
        const double* g = p.grad_if();
        double* m = m_[i].data();
        double* v = v_[i].data();
        double* w = p.mut();
        for (i64 j = 0; j < p.numel(); ++j) {
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
            if (lr != 0.0) {
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                w[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tasks
// ---------------------------------------------------------------------------

std::string toy_task_name(ToyTaskKind kind) {
    switch (kind) {
        case ToyTaskKind::FirstTokenMatch:
            return "first-token-match";
        case ToyTaskKind::GlobalMajority:
            return "global-majority";
        default:
            return "ctc-strings";
    }
}

ToyTaskKind toy_task_from_name(const std::string& name) {
    for (ToyTaskKind kind :
         {ToyTaskKind::FirstTokenMatch, ToyTaskKind::GlobalMajority, ToyTaskKind::CtcStrings}) {
        if (toy_task_name(kind) == name) return kind;
    }
    throw ConfigError("unknown task '" + name +
                      "' (valid: first-token-match, global-majority, ctc-strings)");
}

i64 ToyTask::num_classes() const {
    // first-token-match: class 1 = differs, class 2 = matches (0 reserved).
    if (kind == ToyTaskKind::FirstTokenMatch) return 3;
    return vocab_in + 1;
}

namespace {

Tensor one_hot_rows(const std::vector<i64>& ids, i64 width) {
    Tensor x = Tensor::zeros({static_cast<i64>(ids.size()), width});
    double* xd = x.mut();
    for (size_t t = 0; t < ids.size(); ++t) xd[static_cast<i64>(t) * width + ids[t]] = 1.0;
    return x;
}

}  // namespace

ToySample make_sample(const ToyTask& task, Rng& rng) {
    const i64 n = rng.randint(task.n_min, task.n_max);
    const i64 v = task.vocab_in;
    ToySample s;
    std::vector<i64> ids(static_cast<size_t>(n));

    switch (task.kind) {
        case ToyTaskKind::FirstTokenMatch: {
            // Every frame is iid uniform over TWO symbols: matching frame 0
            // stays a fair coin, and a window that misses frame 0 carries no
            // information about it. (A wider alphabet with a balanced match
            // rate would make the anchor the majority symbol of every local
            // window and leak it to local-only models.)
            for (i64 t = 0; t < n; ++t) ids[static_cast<size_t>(t)] = rng.randint(0, 1);
            for (i64 t = 0; t < n; ++t) {
                s.frame_labels.push_back(ids[static_cast<size_t>(t)] == ids[0] ? 2 : 1);
            }
            break;
        }
        case ToyTaskKind::GlobalMajority: {
            // Two symbols with a planted 3:1 bias toward one of them: the
            // realized majority sits far from a tie, so the target is stable
            // and reachable by global mean pooling. (An unbiased many-symbol
            // argmax leaves a top-two count gap of one or two draws, which
            // this model scale cannot separate.) Labels always follow the
            // realized counts, never the planted coin.
            const i64 planted = rng.randint(0, 1);
            i64 ones = 0;
            for (i64 t = 0; t < n; ++t) {
                const bool match = rng.uniform(0.0, 1.0) < 0.75;
                ids[static_cast<size_t>(t)] = match ? planted : 1 - planted;
                ones += ids[static_cast<size_t>(t)];
            }
            const i64 majority = (2 * ones > n) ? 1 : 0;  // ties resolve to 0
            s.frame_labels.assign(static_cast<size_t>(n), majority + 1);
            break;
        }
        case ToyTaskKind::CtcStrings: {
            const i64 len = rng.randint(2, 5);
            std::vector<i64> symbols(static_cast<size_t>(len));
            for (i64 i = 0; i < len; ++i) symbols[static_cast<size_t>(i)] = rng.randint(1, v);
            // len-1 random interior cut points split the frames into spans.
            std::vector<i64> cuts;
            for (i64 i = 0; i < len - 1; ++i) cuts.push_back(rng.randint(1, n - 1));
            std::sort(cuts.begin(), cuts.end());
            cuts.push_back(n);
            s.frame_labels.resize(static_cast<size_t>(n));
            i64 t = 0;
            for (i64 span = 0; span < len; ++span) {
                for (; t < cuts[static_cast<size_t>(span)]; ++t) {
                    ids[static_cast<size_t>(t)] = symbols[static_cast<size_t>(span)] - 1;
                    s.frame_labels[static_cast<size_t>(t)] = symbols[static_cast<size_t>(span)];
                }
            }
            // Empty spans drop their symbol from the reference string.
            i64 prev_cut = 0;
            for (i64 span = 0; span < len; ++span) {
                if (cuts[static_cast<size_t>(span)] > prev_cut) {
                    s.ctc_targets.push_back(symbols[static_cast<size_t>(span)]);
                }
                prev_cut = cuts[static_cast<size_t>(span)];
            }
            break;
        }
    }
    s.features = one_hot_rows(ids, v);
    return s;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

HeadParams HeadParams::init(i64 d, i64 classes, Rng& rng) {
    HeadParams h;
    Rng r = rng.fork();
    const double limit = std::sqrt(6.0 / static_cast<double>(d + classes));
    h.w = Tensor::rand_uniform({d, classes}, r, -limit, limit);
    h.b = Tensor::zeros({classes});
    return h;
}

std::vector<Tensor> HeadParams::parameters() const { return {w, b}; }

ToyModel ToyModel::init(const EncoderConfig& cfg, ModelKind kind, const ToyTask& task,
                        i64 max_len, Rng& rng) {
    ToyModel m;
    m.encoder = EncoderParams::init_toy(cfg, kind, task.vocab_in, max_len, rng);
    m.head = HeadParams::init(cfg.d_model, task.num_classes(), rng);
    return m;
}

std::vector<Tensor> ToyModel::parameters() const {
    std::vector<Tensor> out = encoder.parameters();
    auto hp = head.parameters();
    out.insert(out.end(), hp.begin(), hp.end());
    return out;
}

Tensor toy_log_probs(const Tensor& features, const ToyModel& m) {
    Tensor h = encoder_forward(features, m.encoder);
    Tensor logits = ops::add_rowvec(ops::matmul(h, m.head.w), m.head.b);
    return ops::log_softmax(logits, 1);
}

EncoderConfig toy_encoder_config() {
    EncoderConfig cfg;
    cfg.d_model = 32;
    cfg.n_layers = 2;
    cfg.k = 4;
    cfg.d_ffn = 128;
    cfg.d_prime = 128;
    cfg.kernel = 7;
    cfg.gi_kind = GiKind::Hypermixer;
    cfg.tied_hypernets = false;
    cfg.vocab = 16;
    cfg.n_decoder_layers = 0;
    return cfg;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

Tensor sample_loss(const ToyTask& task, const ToySample& s, const ToyModel& model) {
    Tensor logp = toy_log_probs(s.features, model);
    Tensor frame = ops::nll_rows(logp, s.frame_labels);
    if (task.kind != ToyTaskKind::CtcStrings) return frame;
    // Per-frame normalization keeps the lattice term on the same scale as
    // the mean frame loss; an unnormalized sum grows with N and drives the
    // early optimum toward all-blank predictions.
    Tensor ctc = ops::scale(ctc_loss(logp, s.ctc_targets),
                            1.0 / static_cast<double>(logp.dim(0)));
    return ops::add(ops::scale(ctc, 0.3), ops::scale(frame, 0.7));
}

double frame_accuracy(const ToyTask& task, const std::vector<ToySample>& eval_set,
                      const ToyModel& model) {
    i64 hit = 0;
    i64 total = 0;
    for (const ToySample& s : eval_set) {
        Tensor logp = toy_log_probs(s.features, model);
        const i64 n = logp.dim(0);
        const i64 classes = logp.dim(1);
        const double* lp = logp.data();
        for (i64 t = 0; t < n; ++t) {
            i64 best = 0;
            for (i64 c = 1; c < classes; ++c) {
                if (lp[t * classes + c] > lp[t * classes + best]) best = c;
            }
            hit += best == s.frame_labels[static_cast<size_t>(t)] ? 1 : 0;
            ++total;
        }
    }
    (void)task;
    return static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace

TrainResult train_toy(const ToyTask& task, const EncoderConfig& cfg, ModelKind kind,
                      const TrainToyOptions& opt) {
    Rng rng(opt.seed);
    Rng data_rng = rng.fork();
    Rng model_rng = rng.fork();

    std::vector<ToySample> train_set, eval_set;
    for (i64 i = 0; i < opt.train_samples; ++i) train_set.push_back(make_sample(task, data_rng));
    for (i64 i = 0; i < opt.eval_samples; ++i) eval_set.push_back(make_sample(task, data_rng));

    ToyModel model = ToyModel::init(cfg, kind, task, task.n_max, model_rng);

    AdamConfig acfg;
    acfg.lr = opt.lr;
    acfg.warmup_steps = opt.warmup_steps;
    Adam opt_state(model.parameters(), acfg);

    TrainResult result;
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    i64 step = 0;
    for (i64 epoch = 0; epoch < opt.epochs; ++epoch) {
        // Deterministic Fisher-Yates reshuffle each epoch.
        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1],
                      order[static_cast<size_t>(data_rng.randint(0, static_cast<i64>(i) - 1))]);
        }
        double loss_sum = 0.0;
        for (size_t idx : order) {
            Tape tape;
            Tensor loss;
            {
                TapeScope scope(&tape);
                loss = sample_loss(task, train_set[idx], model);
            }
            const double lv = loss.item();
            if (!std::isfinite(lv)) {
                throw DivergenceError("training loss " + std::to_string(lv) + " at step " +
                                      std::to_string(step));
            }
            loss_sum += lv;
            opt_state.zero_grads();
            tape.backward(loss);
            opt_state.step();
            ++step;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(train_set.size()));
        result.epoch_accuracy.push_back(frame_accuracy(task, eval_set, model));
    }
    result.final_accuracy = result.epoch_accuracy.empty() ? 0.0 : result.epoch_accuracy.back();
    result.steps_run = step;
    return result;
}

}  // namespace hypermix

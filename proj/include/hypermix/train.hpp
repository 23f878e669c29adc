#pragma once

#include <string>
#include <vector>

#include "hypermix/conformer.hpp"
#include "hypermix/config.hpp"
#include "hypermix/rng.hpp"
#include "hypermix/tensor.hpp"

// Desk-scale training: synthetic labeling tasks whose labels follow a stated
// deterministic rule, a toy encoder (linear frontend, no subsampling, so
// frame labels stay aligned with input frames), and Adam with linear
// warmup. The tasks certify that the global-interaction mechanisms learn
// long-range structure a local-only model cannot:
//
//   first-token-match  frame t is labeled by whether its symbol equals
//                      frame 0's symbol (match probability balanced at 1/2);
//                      requires transporting frame 0 across the sequence.
//   global-majority    every frame is labeled with the majority symbol of
//                      the whole sequence (ties -> smallest id).
//   ctc-strings        a short symbol string is painted over contiguous
//                      spans; the frame labels are the painted symbols and
//                      the string is also supervised with the alignment-free
//                      loss, combined as 0.3 * ctc + 0.7 * frame.

namespace hypermix {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    i64 warmup_steps = 0;  // linear ramp from 0 to lr, then constant
};

class Adam {
  public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);
    void zero_grads();
    void step();  // reads grads, updates parameters in place
    i64 steps_taken() const { return t_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    i64 t_ = 0;
};

enum class ToyTaskKind { FirstTokenMatch, GlobalMajority, CtcStrings };

std::string toy_task_name(ToyTaskKind kind);
ToyTaskKind toy_task_from_name(const std::string& name);  // throws ConfigError

struct ToyTask {
    ToyTaskKind kind = ToyTaskKind::FirstTokenMatch;
    i64 n_min = 64;
    i64 n_max = 96;
    i64 vocab_in = 8;  // input symbol inventory (one-hot feature width)

    // Classifier width including the blank/unused class 0.
    i64 num_classes() const;
};

struct ToySample {
    Tensor features;                // [N, vocab_in] one-hot rows
    std::vector<i64> frame_labels;  // one per frame, in 1..num_classes()-1
    std::vector<i64> ctc_targets;   // ctc-strings only, empty otherwise
};

ToySample make_sample(const ToyTask& task, Rng& rng);

struct HeadParams {
    Tensor w, b;  // [d, classes], [classes]
    static HeadParams init(i64 d, i64 classes, Rng& rng);
    std::vector<Tensor> parameters() const;
};

struct ToyModel {
    EncoderParams encoder;
    HeadParams head;
    static ToyModel init(const EncoderConfig& cfg, ModelKind kind, const ToyTask& task,
                         i64 max_len, Rng& rng);
    std::vector<Tensor> parameters() const;
};

// Per-frame log-probabilities: log_softmax(head(encoder(x))), [N, classes].
Tensor toy_log_probs(const Tensor& features, const ToyModel& m);

// d_model 32, 2 layers, 4 heads, ffn and generator width 128, kernel 7.
EncoderConfig toy_encoder_config();

struct TrainToyOptions {
    i64 epochs = 14;
    i64 train_samples = 96;
    i64 eval_samples = 32;
    double lr = 3e-3;
    i64 warmup_steps = 40;
    u64 seed = 1;
};

struct TrainResult {
    std::vector<double> epoch_loss;      // mean training loss per epoch
    std::vector<double> epoch_accuracy;  // eval frame accuracy per epoch
    double final_accuracy = 0.0;
    i64 steps_run = 0;
};

// Throws DivergenceError (with the step index) if the loss leaves the reals.
TrainResult train_toy(const ToyTask& task, const EncoderConfig& cfg, ModelKind kind,
                      const TrainToyOptions& opt);

}  // namespace hypermix

#pragma once

#include <vector>

#include "hypermix/tensor.hpp"

// Alignment-free sequence loss and greedy decoding. log_probs is [N, C]
// with class 0 the blank and rows that are log-softmax outputs; targets
// hold labels in 1..C-1. The loss is the negative log probability of all
// frame alignments that collapse (merge repeats, drop blanks) to the
// targets, computed by the standard forward recursion over the
// blank-interleaved label sequence, entirely in log space. It is
// differentiable through log_probs; the backward pass uses the matching
// suffix recursion rather than finite differences.

namespace hypermix {

// Feasibility: N >= L + (number of equal adjacent target pairs). Violations
// raise InfeasibleError; malformed inputs (labels out of range, rows not
// normalized) raise InputError.
Tensor ctc_loss(const Tensor& log_probs, const std::vector<i64>& targets);

// Per-frame argmax, collapse repeats, drop blanks.
std::vector<i64> greedy_decode(const Tensor& log_probs);

}  // namespace hypermix

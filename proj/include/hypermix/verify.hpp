#pragma once

#include <string>
#include <vector>

#include "hypermix/tensor.hpp"

// Independent recomputations of the engine's answers: exhaustive
// enumeration for the sequence loss, dense scalar loops for the fused and
// factored kernels, hand-worked examples, permutation probes, and
// central-difference gradient checks. Everything here is deterministic
// given the seed — no clocks, no pointers — so two runs with the same seed
// produce byte-identical reports.

namespace hypermix {

struct CheckResult {
    std::string name;
    bool passed = false;
    double observed = 0.0;   // worst discrepancy found (or the margin measured)
    double tolerance = 0.0;  // bound it was held to (floor for must-differ checks)
    std::string detail;      // deterministic one-line description
};

// The oracle suite: worked examples, dense-loop and enumeration oracles,
// equivariance and locality probes.
std::vector<CheckResult> run_verify(u64 seed);

// Central-difference gradient checks, h = 1e-5, relative error
// |a - n| / max(|a|, |n|, 1e-2), threshold 1e-4. `module` is one of
// gradcheck_module_names() or "all".
std::vector<std::string> gradcheck_module_names();
std::vector<CheckResult> run_gradcheck(const std::string& module, u64 seed);

}  // namespace hypermix

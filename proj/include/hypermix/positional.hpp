#pragma once

#include "hypermix/tensor.hpp"

namespace hypermix {

// Fixed sinusoidal position table: row p holds
//   table[p, 2i]   = sin(p / 10000^(2i/width))
//   table[p, 2i+1] = cos(p / 10000^(2i/width))
// Not learned; models slice row prefixes (and, per head, column ranges).
Tensor sinusoid_table(i64 max_len, i64 width);

// First n rows of a table, as a free view. Throws CapacityError when the
// table is too short for the requested sequence.
Tensor position_rows(const Tensor& table, i64 n);

}  // namespace hypermix

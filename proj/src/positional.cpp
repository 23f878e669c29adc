#include "hypermix/positional.hpp"

#include <cmath>

#include "hypermix/error.hpp"

namespace hypermix {

Tensor sinusoid_table(i64 max_len, i64 width) {
    Tensor t = Tensor::uninit({max_len, width});
    double* d = t.mut();
    for (i64 p = 0; p < max_len; ++p) {
        for (i64 i = 0; i < width; i += 2) {
            const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(width));
            const double angle = static_cast<double>(p) * freq;
            d[p * width + i] = std::sin(angle);
            if (i + 1 < width) d[p * width + i + 1] = std::cos(angle);
        }
    }
    return t;
}

Tensor position_rows(const Tensor& table, i64 n) {
    if (n > table.dim(0)) {
        throw CapacityError("position table holds " + std::to_string(table.dim(0)) +
                            " rows, sequence needs " + std::to_string(n));
    }
    return table.prefix_rows(n);
}

}  // namespace hypermix

#include "hypermix/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hypermix/error.hpp"
#include "hypermix/instrumentation.hpp"

namespace hypermix {

i64 shape_numel(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<i64>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

struct Tensor::Storage {
    std::vector<double> data;
    std::vector<double> grad;  // empty until first accumulation

    explicit Storage(i64 n) : data(static_cast<size_t>(n)) {
        count_alloc(n * static_cast<i64>(sizeof(double)));
    }

    ~Storage() {
        count_free(static_cast<i64>(data.size() * sizeof(double)));
        if (!grad.empty()) count_free(static_cast<i64>(grad.size() * sizeof(double)));
    }

    void ensure_grad() {
        if (grad.empty()) {
            grad.assign(data.size(), 0.0);
            count_alloc(static_cast<i64>(grad.size() * sizeof(double)));
        }
    }
};

namespace {
void validate_shape(const std::vector<i64>& shape) {
    for (i64 d : shape) {
        if (d <= 0) throw DimensionError("tensor shape has non-positive extent: " + shape_str(shape));
    }
}
}  // namespace

Tensor Tensor::uninit(std::vector<i64> shape) {
    validate_shape(shape);
    Tensor t;
    t.st_ = std::make_shared<Storage>(shape_numel(shape));
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::zeros(std::vector<i64> shape) {
    Tensor t = uninit(std::move(shape));
    std::fill(t.st_->data.begin(), t.st_->data.end(), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<i64> shape, double value) {
    Tensor t = uninit(std::move(shape));
    std::fill(t.st_->data.begin(), t.st_->data.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(std::vector<i64> shape, std::vector<double> values) {
    if (shape_numel(shape) != static_cast<i64>(values.size())) {
        throw DimensionError("from_data: " + std::to_string(values.size()) +
                             " values for shape " + shape_str(shape));
    }
    Tensor t = uninit(std::move(shape));
    std::copy(values.begin(), values.end(), t.st_->data.begin());
    return t;
}

Tensor Tensor::randn(std::vector<i64> shape, Rng& rng, double stddev) {
    Tensor t = uninit(std::move(shape));
    for (double& v : t.st_->data) v = rng.normal() * stddev;
    return t;
}

Tensor Tensor::rand_uniform(std::vector<i64> shape, Rng& rng, double lo, double hi) {
    Tensor t = uninit(std::move(shape));
    for (double& v : t.st_->data) v = rng.uniform(lo, hi);
    return t;
}

// Derived from the visible shape, not the storage size: a prefix view is
// narrower than the buffer it shares.
i64 Tensor::numel() const { return st_ ? shape_numel(shape_) : 0; }

const double* Tensor::data() const { return st_->data.data(); }

double* Tensor::mut() { return st_->data.data(); }

double Tensor::item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape_));
    return st_->data[0];
}

double Tensor::at(std::initializer_list<i64> idx) const {
    if (static_cast<i64>(idx.size()) != ndim()) {
        throw DimensionError("at(): " + std::to_string(idx.size()) + " indices for shape " +
                             shape_str(shape_));
    }
    i64 flat = 0;
    i64 axis = 0;
    for (i64 i : idx) {
        const i64 extent = shape_[static_cast<size_t>(axis)];
        if (i < 0 || i >= extent) {
            throw DimensionError("at(): index " + std::to_string(i) + " out of range for shape " +
                                 shape_str(shape_));
        }
        flat = flat * extent + i;
        ++axis;
    }
    return st_->data[static_cast<size_t>(flat)];
}

bool Tensor::grad_allocated() const { return st_ && !st_->grad.empty(); }

double* Tensor::grad() {
    st_->ensure_grad();
    return st_->grad.data();
}

const double* Tensor::grad_if() const {
    if (!grad_allocated()) return nullptr;
    return st_->grad.data();
}

void Tensor::zero_grad() {
    if (grad_allocated()) std::fill(st_->grad.begin(), st_->grad.end(), 0.0);
}

Tensor Tensor::reshaped(std::vector<i64> shape) const {
    validate_shape(shape);
    if (shape_numel(shape) != numel()) {
        throw DimensionError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                             ": element counts differ");
    }
    Tensor t;
    t.st_ = st_;
    t.shape_ = std::move(shape);
    return t;
}

Tensor Tensor::prefix_rows(i64 n) const {
    if (ndim() != 2) throw DimensionError("prefix_rows on shape " + shape_str(shape_));
    if (n < 1 || n > dim(0)) {
        throw DimensionError("prefix_rows: " + std::to_string(n) + " rows from shape " +
                             shape_str(shape_));
    }
    // Contiguous prefix of a row-major matrix; shares storage but narrows the
    // visible extent. Ops only ever touch the first n*cols elements.
    Tensor t;
    t.st_ = st_;
    t.shape_ = {n, dim(1)};
    return t;
}

}  // namespace hypermix

#include "unipcb/tensor.hpp"

#include <cmath>
#include <sstream>

#include "unipcb/rng.hpp"

namespace unipcb {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t d : shape) p *= d;
    return p;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

static void validate_shape(const std::vector<std::size_t>& shape) {
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("tensor shape has a zero dimension: " + shape_to_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    validate_shape(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(shape_product(t.shape_), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    if (!std::isfinite(value)) throw NumericError("Tensor::full with non-finite value");
    validate_shape(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_.assign(shape_product(t.shape_), value);
    return t;
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool allow_non_finite) {
    validate_shape(shape);
    if (shape_product(shape) != data.size()) {
        throw DimensionError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_to_string(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::move(data);
    if (!allow_non_finite) t.assert_finite("Tensor::from_data");
    return t;
}

Tensor Tensor::random_uniform(std::vector<std::size_t> shape, Rng& rng, double lo, double hi) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.data_) v = rng.uniform(lo, hi);
    return t;
}

Tensor Tensor::random_normal(std::vector<std::size_t> shape, Rng& rng) {
    Tensor t = zeros(std::move(shape));
    for (double& v : t.data_) v = rng.normal();
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(shape_.size()));
    }
    return shape_[axis];
}

void Tensor::assert_finite(const char* context) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(context) + ": non-finite value encountered");
        }
    }
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    validate_shape(new_shape);
    if (shape_product(new_shape) != data_.size()) {
        throw DimensionError("reshape " + shape_to_string(shape_) + " -> " +
                             shape_to_string(new_shape) + " changes element count");
    }
    Tensor t;
    t.shape_ = std::move(new_shape);
    t.data_ = data_;
    return t;
}

static void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    }
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
    return out;
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) return false;  // NaN-free by invariant
    }
    return true;
}

double kahan_sum(const double* values, std::size_t n) {
    // Neumaier's variant: the branch keeps the compensation when a single
    // addend dwarfs the running sum, which plain Kahan loses.
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i];
        const double t = sum + v;
        if (std::fabs(sum) >= std::fabs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

double kahan_sum(const std::vector<double>& values) {
    return kahan_sum(values.data(), values.size());
}

} // namespace unipcb

#pragma once

#include <cstddef>
#include <vector>

#include "unipcb/errors.hpp"

namespace unipcb {

class Rng;

/// Dense N-dimensional float64 array with explicit shape, row-major layout.
/// Feature maps follow the (N, C, H, W) convention. Construction validates
/// that product(shape) == data length and that every value is finite unless
/// the caller explicitly opts out.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                            bool allow_non_finite = false);
    /// Elementwise deterministic uniform draws in [lo, hi).
    static Tensor random_uniform(std::vector<std::size_t> shape, Rng& rng,
                                 double lo = -1.0, double hi = 1.0);
    /// Elementwise standard normal draws.
    static Tensor random_normal(std::vector<std::size_t> shape, Rng& rng);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // NCHW accessors for rank-4 tensors; bounds are the caller's contract.
    double at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    double& at4(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
    }
    // Rank-2 accessor (rows, cols).
    double at2(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
    double& at2(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Throws NumericError if any value is NaN or infinite.
    void assert_finite(const char* context = "tensor") const;

    Tensor reshaped(std::vector<std::size_t> new_shape) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Elementwise arithmetic. Shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// Compensated (Kahan-Neumaier) summation; deterministic regardless of how callers
/// partition work.
double kahan_sum(const double* values, std::size_t n);
double kahan_sum(const std::vector<double>& values);

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

} // namespace unipcb

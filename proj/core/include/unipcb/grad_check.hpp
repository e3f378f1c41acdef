#pragma once

#include <functional>

#include "unipcb/tensor.hpp"

namespace unipcb {

/// Central-difference gradient verification. Evaluates
/// (f(x+h·e_i) − f(x−h·e_i)) / 2h per element and compares with grad_f(x).
/// Returns the max relative error |a−n| / (|a|+|n|+1e-12).
/// h must lie in [1e-6, 1e-3]; non-finite f evaluations raise NumericError.
double grad_check(const std::function<double(const Tensor&)>& f,
                  const std::function<Tensor(const Tensor&)>& grad_f,
                  const Tensor& x, double h);

} // namespace unipcb

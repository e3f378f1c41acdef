#include "unipcb/grad_check.hpp"

#include <cmath>

namespace unipcb {

double grad_check(const std::function<double(const Tensor&)>& f,
                  const std::function<Tensor(const Tensor&)>& grad_f,
                  const Tensor& x, double h) {
    if (!(h >= 1e-6 && h <= 1e-3)) {
        throw ValidationError("grad_check: h must lie in [1e-6, 1e-3]");
    }
    const Tensor analytic = grad_f(x);
    if (!analytic.same_shape(x)) {
        throw DimensionError("grad_check: gradient shape " + shape_to_string(analytic.shape()) +
                             " does not match input " + shape_to_string(x.shape()));
    }

    Tensor probe = x;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite function evaluation");
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double a = analytic[i];
        const double rel = std::fabs(a - numeric) / (std::fabs(a) + std::fabs(numeric) + 1e-12);
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace unipcb

#include "unipcb/diffusion.hpp"

#include <cmath>

namespace unipcb::diff {

double NoiseSchedule::alpha_bar(std::size_t t) const {
    if (t >= alphaBars.size()) {
        throw ValidationError("schedule: timestep " + std::to_string(t) + " exceeds T = " +
                              std::to_string(T));
    }
    return alphaBars[t];
}

NoiseSchedule make_schedule(std::size_t T, double beta_start, double beta_end) {
    if (T < 1) throw ValidationError("make_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
        throw ValidationError("make_schedule: need 0 < betaStart <= betaEnd < 1");
    }
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        s.betas[i] = T == 1 ? beta_start
                            : beta_start + (beta_end - beta_start) *
                                               static_cast<double>(i) /
                                               static_cast<double>(T - 1);
    }
    s.alphaBars.resize(T + 1);
    s.alphaBars[0] = 1.0;
    for (std::size_t t = 1; t <= T; ++t) {
        s.alphaBars[t] = s.alphaBars[t - 1] * (1.0 - s.betas[t - 1]);
    }
    return s;
}

Tensor forward_noising(const Tensor& z0, std::size_t t, const Tensor& eps,
                       const NoiseSchedule& sched) {
    if (!z0.same_shape(eps)) {
        throw DimensionError("forward_noising: z0 shape " + shape_to_string(z0.shape()) +
                             " does not match eps " + shape_to_string(eps.shape()));
    }
    const double ab = sched.alpha_bar(t);
    const double sa = std::sqrt(ab);
    const double sn = std::sqrt(1.0 - ab);
    Tensor out = z0;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sa * z0[i] + sn * eps[i];
    return out;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& sched, double eta) {
    if (eta != 0.0) throw ValidationError("ddim_step: only eta = 0 is supported");
    if (t_prev > t) {
        throw ValidationError("ddim_step: tPrev " + std::to_string(t_prev) +
                              " must not exceed t " + std::to_string(t));
    }
    if (!z_t.same_shape(eps_hat)) {
        throw DimensionError("ddim_step: z_t shape " + shape_to_string(z_t.shape()) +
                             " does not match eps_hat " + shape_to_string(eps_hat.shape()));
    }
    if (t_prev == t) return z_t;

    const double ab_t = sched.alpha_bar(t);
    const double ab_p = sched.alpha_bar(t_prev);
    const double sa_t = std::sqrt(ab_t);
    const double sn_t = std::sqrt(1.0 - ab_t);
    const double sa_p = std::sqrt(ab_p);
    const double sn_p = std::sqrt(1.0 - ab_p);

    Tensor out = z_t;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double z0_hat = (z_t[i] - sn_t * eps_hat[i]) / sa_t;
        out[i] = sa_p * z0_hat + sn_p * eps_hat[i];
    }
    return out;
}

std::vector<std::size_t> skip_timesteps(const NoiseSchedule& sched, std::size_t steps) {
    if (steps < 1) throw ValidationError("skip_timesteps: steps must be >= 1");
    if (steps > sched.T) {
        throw ValidationError("skip_timesteps: steps " + std::to_string(steps) + " exceed T = " +
                              std::to_string(sched.T));
    }
    std::vector<std::size_t> ts(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
        const double f = static_cast<double>(steps - i) / static_cast<double>(steps);
        ts[i] = static_cast<std::size_t>(std::llround(f * static_cast<double>(sched.T)));
    }
    return ts;
}

} // namespace unipcb::diff

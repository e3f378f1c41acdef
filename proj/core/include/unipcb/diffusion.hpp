#pragma once

#include <cstddef>
#include <vector>

#include "unipcb/tensor.hpp"

namespace unipcb::diff {

/// Linear variance schedule. betas holds beta_1..beta_T at indices 0..T-1;
/// alphaBars holds the running products of (1 - beta) with alphaBars[0] = 1,
/// so it has T+1 entries and is strictly decreasing.
struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphaBars;
    std::size_t T = 0;

    double alpha_bar(std::size_t t) const;
};

/// Latent tensor together with its timestep index, 0 <= t <= T.
struct LatentState {
    Tensor z;
    std::size_t t = 0;
};

NoiseSchedule make_schedule(std::size_t T, double betaStart, double betaEnd);

/// z_t = sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps.
Tensor forward_noising(const Tensor& z0, std::size_t t, const Tensor& eps,
                       const NoiseSchedule& sched);

/// Deterministic DDIM update t -> tPrev (tPrev <= t; tPrev == t is the
/// identity): predict z0 from the noise estimate, then re-noise to tPrev
/// with the same estimate. Only eta = 0 is supported.
Tensor ddim_step(const Tensor& z_t, const Tensor& eps_hat, std::size_t t, std::size_t t_prev,
                 const NoiseSchedule& sched, double eta = 0.0);

/// Evenly spaced descending timestep sequence T = ts[0] > ... > ts[steps] = 0
/// used by skip-step sampling.
std::vector<std::size_t> skip_timesteps(const NoiseSchedule& sched, std::size_t steps);

} // namespace unipcb::diff

#pragma once

#include "emrdm/rng.hpp"
#include "emrdm/schedule.hpp"
#include "emrdm/tensor.hpp"

namespace emrdm {

// Forward perturbation, the Euler-Maruyama forward-SDE oracle, the
// backward-ODE right-hand side and the score/denoiser conversion. All
// tensors live in x~-space (x~ = x/s) except simulate_forward_sde, which
// integrates the raw x-space SDE.

struct DiffusionState {
    Tensor x_tilde;  // (L,C,H,W)
    double t = 0.0;
    Tensor mu;       // (L,C,H,W), corrupted observations
};

// x~^l(t) = x0 + k(t)*mu^l + sigma(t)*eps^l with independent eps per l.
Tensor perturb(const Tensor& x0, const Tensor& mu_seq, const Schedule& sched, double t,
               Rng& rng);
// Deterministic variant taking the noise explicitly (eps shaped like mu_seq).
Tensor perturb_with_noise(const Tensor& x0, const Tensor& mu_seq, const Schedule& sched,
                          double t, const Tensor& eps_seq);

// Test oracle: fixed-step Euler-Maruyama integration of
// dx = f(t)(x - mu) dt + g(t) dw from 0 to t_end, in x-space.
// noise_scale = 0 silences the diffusion term (deterministic mean path).
Tensor simulate_forward_sde(const Tensor& x0, const Tensor& mu, const Schedule& sched,
                            double t_end, int steps, uint64_t seed,
                            double noise_scale = 1.0);

// d x~^l / dt = -(s_dot/s^2) mu^l - (sigma_dot/sigma)(D + k mu^l - x~^l).
// `denoised` carries a single temporal slice shared across l.
Tensor ode_rhs(const DiffusionState& state, const Tensor& denoised, const Schedule& sched);

// Score in x~-space: (D + k*mu - x~) / sigma^2, elementwise per slice.
Tensor score_from_denoiser(const Tensor& x_tilde, const Tensor& denoised, const Tensor& mu,
                           const Schedule& sched, double t);

}  // namespace emrdm

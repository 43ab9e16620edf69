#pragma once

#include <cstdint>
#include <vector>

#include "emrdm/nets.hpp"
#include "emrdm/schedule.hpp"
#include "emrdm/tensor.hpp"

namespace emrdm {

// Stochastic/deterministic sampler configuration. S_churn = 0 makes the
// sampler deterministic. n_steps Euler steps run over a grid of
// n_steps+1 noise levels from sigma_max down to sigma_min.
struct SamplerConfig {
    int n_steps = 5;
    double s_churn = 1.0;
    double s_tmin = 0.0;
    double s_tmax = 100.0;
    double s_noise = 1.0;
    double sigma_min = 0.001;
    double sigma_max = 100.0;
    double rho = 7.0;
    uint64_t seed = 0;

    void validate() const;
    SigmaGrid time_grid() const;  // n_steps+1 levels, descending
};

struct TraceRow {
    int step;
    double t;
    double t_hat;
    double mean_abs;
};

// Noisy start at t = sigma_max: x0^l = k(sigma_max)*mu^l + sigma_max*eps^l
// with an independent noise stream per time point.
Tensor init_states(const Tensor& mu_seq, const Schedule& sched, const SamplerConfig& cfg,
                   uint64_t seed);

// Churn core (Eq. form: lift state from t to t_hat = (1+gamma)t):
// x^l += (k(t_hat)-k(t))*mu^l + sqrt(sigma(t_hat)^2 - sigma(t)^2)*s_noise*eps^l.
double churn_state(Tensor& x_seq, const Tensor& mu_seq, const Schedule& sched, double t,
                   double gamma, double s_noise, uint64_t seed, uint64_t step_index);

// gamma_i for grid step i: s_churn/n_steps inside [s_tmin, s_tmax], else 0.
double churn_gamma(const SamplerConfig& cfg, double t_i);

// Full sampling loop from explicit initial states; returns the temporal
// mean of the last Euler states (single slice).
Tensor sample_loop(Tensor states, const Denoiser& denoiser, const Tensor& mu_seq,
                   const Tensor& cond, const Schedule& sched, const SamplerConfig& cfg,
                   std::vector<TraceRow>* trace = nullptr);

// init_states + sample_loop with the config's seed.
Tensor sample(const Denoiser& denoiser, const Tensor& mu_seq, const Tensor& cond,
              const Schedule& sched, const SamplerConfig& cfg,
              std::vector<TraceRow>* trace = nullptr);

}  // namespace emrdm

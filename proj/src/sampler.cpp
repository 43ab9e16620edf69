#include "emrdm/sampler.hpp"

#include <cmath>
#include <string>

#include "emrdm/diffusion.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"

namespace emrdm {

void SamplerConfig::validate() const {
    if (n_steps < 1) throw ConfigError("sampler: n_steps must be >= 1");
    if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
        throw ConfigError("sampler: need 0 < sigma_min < sigma_max");
    if (s_churn < 0.0) throw ConfigError("sampler: s_churn must be >= 0");
    if (!(s_noise > 0.0)) throw ConfigError("sampler: s_noise must be > 0");
    if (s_tmin < 0.0 || s_tmin > s_tmax)
        throw ConfigError("sampler: need 0 <= s_tmin <= s_tmax");
    if (!(rho > 0.0)) throw ConfigError("sampler: rho must be > 0");
}

SigmaGrid SamplerConfig::time_grid() const {
    // n_steps Euler steps need n_steps+1 levels; the last step lands on
    // sigma_min, never on the sigma = 0 singularity.
    return make_sigma_grid(sigma_min, sigma_max, n_steps + 1, rho);
}

Tensor init_states(const Tensor& mu_seq, const Schedule& sched, const SamplerConfig& cfg,
                   uint64_t seed) {
    cfg.validate();
    const double t_max = cfg.sigma_max;
    const double k = sched.k(t_max);
    const double sig = sched.sigma(t_max);

    Tensor x(mu_seq.shape());
    const size_t n = mu_seq.slice_count();
    Tensor eps(Shape{1, mu_seq.shape().c, mu_seq.shape().h, mu_seq.shape().w});
    for (int l = 0; l < mu_seq.shape().l; ++l) {
        Rng rng = Rng::stream(seed, "sampler_init", static_cast<uint64_t>(l));
        rng.fill_normal(eps.data(), n);
        // prior mean is 0: x = k*mu + sigma*eps
        kern::lincomb(k, mu_seq.slice_data(l), sig, eps.data(), x.slice_data(l), n);
    }
    return x;
}

double churn_gamma(const SamplerConfig& cfg, double t_i) {
    if (cfg.s_churn <= 0.0) return 0.0;
    if (t_i < cfg.s_tmin || t_i > cfg.s_tmax) return 0.0;
    return cfg.s_churn / cfg.n_steps;  // no sqrt(2)-1 cap
}

double churn_state(Tensor& x_seq, const Tensor& mu_seq, const Schedule& sched, double t,
                   double gamma, double s_noise, uint64_t seed, uint64_t step_index) {
    check_same_shape(x_seq, mu_seq, "churn");
    const double t_hat = (1.0 + gamma) * t;
    if (gamma == 0.0) return t_hat;

    const double dk = sched.k(t_hat) - sched.k(t);
    const double s_t = sched.sigma(t);
    const double s_hat = sched.sigma(t_hat);
    const double radicand = std::max(0.0, s_hat * s_hat - s_t * s_t);
    const double noise_coef = std::sqrt(radicand) * s_noise;

    const size_t n = mu_seq.slice_count();
    Tensor eps(Shape{1, mu_seq.shape().c, mu_seq.shape().h, mu_seq.shape().w});
    for (int l = 0; l < x_seq.shape().l; ++l) {
        Rng rng = Rng::stream(seed, "sampler_churn",
                              step_index * static_cast<uint64_t>(x_seq.shape().l) + l);
        rng.fill_normal(eps.data(), n);
        kern::triad(x_seq.slice_data(l), dk, mu_seq.slice_data(l), noise_coef, eps.data(),
                    x_seq.slice_data(l), n);
    }
    return t_hat;
}

Tensor sample_loop(Tensor states, const Denoiser& denoiser, const Tensor& mu_seq,
                   const Tensor& cond, const Schedule& sched, const SamplerConfig& cfg,
                   std::vector<TraceRow>* trace) {
    cfg.validate();
    check_same_shape(states, mu_seq, "sample");
    const SigmaGrid grid = cfg.time_grid();
    const int L = states.shape().l;

    for (int i = 0; i < cfg.n_steps; ++i) {
        const double t_i = grid[i];
        const double t_next = grid[i + 1];
        const double gamma = churn_gamma(cfg, t_i);
        const double t_hat = churn_state(states, mu_seq, sched, t_i, gamma, cfg.s_noise,
                                         cfg.seed, static_cast<uint64_t>(i));

        // One joint denoiser evaluation per step over the whole sequence.
        const Tensor d = denoiser.denoise(states, t_hat, mu_seq, cond);

        DiffusionState st{states, t_hat, mu_seq};
        const Tensor rhs = ode_rhs(st, d, sched);
        kern::axpy(t_next - t_hat, rhs.data(), states.data(), states.size());

        if (!states.all_finite())
            throw NumericError("sample: non-finite state at step " + std::to_string(i) +
                               " (t_hat=" + std::to_string(t_hat) + ")");
        if (trace != nullptr) {
            const double mean_abs = kern::abs_sum(states.data(), states.size()) /
                                    static_cast<double>(states.size());
            trace->push_back(TraceRow{i, t_i, t_hat, mean_abs});
        }
    }

    // Temporal mean fusion; identity for L = 1.
    Tensor out(Shape{1, states.shape().c, states.shape().h, states.shape().w});
    const double inv_l = 1.0 / L;
    for (int l = 0; l < L; ++l)
        kern::axpy(inv_l, states.slice_data(l), out.data(), out.size());
    return out;
}

Tensor sample(const Denoiser& denoiser, const Tensor& mu_seq, const Tensor& cond,
              const Schedule& sched, const SamplerConfig& cfg, std::vector<TraceRow>* trace) {
    Tensor states = init_states(mu_seq, sched, cfg, cfg.seed);
    return sample_loop(std::move(states), denoiser, mu_seq, cond, sched, cfg, trace);
}

}  // namespace emrdm

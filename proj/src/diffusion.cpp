#include "emrdm/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"

namespace emrdm {

namespace {

void check_target_shape(const Tensor& x0, const Tensor& mu_seq) {
    if (x0.shape().l != 1)
        throw ShapeError("perturb: target must have a single temporal slice, got " +
                         x0.shape().str());
    check_slice_compatible(x0, mu_seq, "perturb");
}

}  // namespace

Tensor perturb(const Tensor& x0, const Tensor& mu_seq, const Schedule& sched, double t,
               Rng& rng) {
    Tensor eps = Tensor::randn(mu_seq.shape(), rng);
    return perturb_with_noise(x0, mu_seq, sched, t, eps);
}

Tensor perturb_with_noise(const Tensor& x0, const Tensor& mu_seq, const Schedule& sched,
                          double t, const Tensor& eps_seq) {
    check_target_shape(x0, mu_seq);
    check_same_shape(mu_seq, eps_seq, "perturb noise");
    const double k = sched.k(t);
    const double sig = sched.sigma(t);

    Tensor out(mu_seq.shape());
    const size_t n = x0.size();
    for (int l = 0; l < mu_seq.shape().l; ++l)
        kern::triad(x0.data(), k, mu_seq.slice_data(l), sig, eps_seq.slice_data(l),
                    out.slice_data(l), n);
    return out;
}

Tensor simulate_forward_sde(const Tensor& x0, const Tensor& mu, const Schedule& sched,
                            double t_end, int steps, uint64_t seed, double noise_scale) {
    if (steps < 1) throw ConfigError("simulate_forward_sde: steps must be >= 1");
    if (!(t_end > 0.0)) throw std::domain_error("simulate_forward_sde: t_end must be > 0");
    check_same_shape(x0, mu, "simulate_forward_sde");

    Rng rng = Rng::stream(seed, "forward_sde");
    const double dt = t_end / steps;
    const double sqrt_dt = std::sqrt(dt);
    const size_t n = x0.size();

    Tensor x = x0;
    Tensor eps(x0.shape());
    for (int i = 0; i < steps; ++i) {
        const double t = i * dt;
        double f = 0.0, g = 0.0;
        sched.drift_diffusion(t, f, g);
        const double gs = g * noise_scale;
        if (gs != 0.0)
            rng.fill_normal(eps.data(), n);
        else
            eps.fill(0.0);
        // x += f*(x - mu)*dt + g*sqrt(dt)*eps
        for (size_t j = 0; j < n; ++j)
            x[j] += f * (x[j] - mu[j]) * dt + gs * sqrt_dt * eps[j];
        if (!x.all_finite())
            throw NumericError("simulate_forward_sde: non-finite state at step " +
                               std::to_string(i) + " (t=" + std::to_string(t) + ")");
    }
    return x;
}

Tensor ode_rhs(const DiffusionState& state, const Tensor& denoised, const Schedule& sched) {
    const double t = state.t;
    if (!(t > 0.0)) throw std::domain_error("ode_rhs: t must be > 0 (sigma in denominator)");
    check_same_shape(state.x_tilde, state.mu, "ode_rhs");
    if (denoised.shape().l != 1)
        throw ShapeError("ode_rhs: denoised estimate must have one temporal slice");
    check_slice_compatible(denoised, state.x_tilde, "ode_rhs");

    const double s = sched.s(t);
    const double mu_coef = -sched.s_dot(t) / (s * s);
    const double ratio = sched.sigma_dot(t) / sched.sigma(t);
    const double k = sched.k(t);

    Tensor rhs(state.x_tilde.shape());
    const size_t n = denoised.size();
    Tensor bracket(denoised.shape());
    for (int l = 0; l < rhs.shape().l; ++l) {
        // bracket = D + k*mu^l - x~^l
        kern::triad(denoised.data(), k, state.mu.slice_data(l), -1.0,
                    state.x_tilde.slice_data(l), bracket.data(), n);
        kern::lincomb(mu_coef, state.mu.slice_data(l), -ratio, bracket.data(),
                      rhs.slice_data(l), n);
    }
    return rhs;
}

Tensor score_from_denoiser(const Tensor& x_tilde, const Tensor& denoised, const Tensor& mu,
                           const Schedule& sched, double t) {
    if (!(t > 0.0)) throw std::domain_error("score_from_denoiser: t must be > 0");
    check_same_shape(x_tilde, mu, "score_from_denoiser");
    if (denoised.shape().l != 1)
        throw ShapeError("score_from_denoiser: denoised estimate must have one temporal slice");
    check_slice_compatible(denoised, x_tilde, "score_from_denoiser");

    const double k = sched.k(t);
    const double sig = sched.sigma(t);
    const double inv_var = 1.0 / (sig * sig);

    Tensor score(x_tilde.shape());
    const size_t n = denoised.size();
    for (int l = 0; l < score.shape().l; ++l) {
        kern::triad(denoised.data(), k, mu.slice_data(l), -1.0, x_tilde.slice_data(l),
                    score.slice_data(l), n);
        kern::scale(inv_var, score.slice_data(l), n);
    }
    return score;
}

}  // namespace emrdm

#include "emrdm/precondition.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"

namespace emrdm {

void PreconditionParams::validate() const {
    if (!(sigma_data > 0.0))
        throw ConfigError("precondition: sigma_data must be > 0");
    if (!(sigma_mu >= 0.0))
        throw ConfigError("precondition: sigma_mu must be >= 0");
    if (std::fabs(sigma_cov) > sigma_data * sigma_mu + 1e-12)
        throw ConfigError("precondition: |sigma_cov| must be <= sigma_data*sigma_mu "
                          "(Cauchy-Schwarz)");
    if (seq_len < 1)
        throw ConfigError("precondition: sequence length must be >= 1");
}

Coefficients coefficients(const PreconditionParams& p, double k, double sigma) {
    if (!(sigma > 0.0))
        throw std::domain_error("coefficients: sigma must be > 0 (c_noise uses ln sigma)");
    const double sd2 = p.sigma_data * p.sigma_data;
    const double sm2 = p.sigma_mu * p.sigma_mu;
    const double s2 = sigma * sigma;
    const double s2_l = s2 / p.seq_len;
    const double common = sd2 + k * k * sm2 + 2.0 * k * p.sigma_cov;

    Coefficients c;
    c.c_in = 1.0 / std::sqrt(common + s2);
    const double denom = common + s2_l;
    c.c_skip = (sd2 + k * p.sigma_cov) / denom;
    const double num = k * k * sm2 * sd2 + s2_l * sd2 - k * k * p.sigma_cov * p.sigma_cov;
    c.c_out = std::sqrt(num / denom);
    c.c_noise = 0.25 * std::log(sigma);
    return c;
}

Coefficients coefficients(const PreconditionParams& p, const Schedule& sched, double t) {
    if (!(t > 0.0)) throw std::domain_error("coefficients: t must be > 0");
    return coefficients(p, sched.k(t), sched.sigma(t));
}

double c_out_sq_for_skip(const PreconditionParams& p, double k, double sigma, double c_skip) {
    const double sd2 = p.sigma_data * p.sigma_data;
    const double sm2 = p.sigma_mu * p.sigma_mu;
    const double s2_l = sigma * sigma / p.seq_len;
    const double one_m = 1.0 - c_skip;
    return one_m * one_m * sd2 + k * k * c_skip * c_skip * sm2 -
           2.0 * one_m * c_skip * k * p.sigma_cov + c_skip * c_skip * s2_l;
}

double loss_weight(const PreconditionParams& p, double k, double sigma) {
    const Coefficients c = coefficients(p, k, sigma);
    const double c_out_sq = c.c_out * c.c_out;
    if (!(c_out_sq > 0.0) || !std::isfinite(c_out_sq))
        throw ConfigError("loss_weight: degenerate c_out at sigma=" + std::to_string(sigma));
    return 1.0 / c_out_sq;
}

double loss_weight(const PreconditionParams& p, const Schedule& sched, double t) {
    if (!(t > 0.0)) throw std::domain_error("loss_weight: t must be > 0");
    return loss_weight(p, sched.k(t), sched.sigma(t));
}

void validate_on_grid(const PreconditionParams& p, const Schedule& sched,
                      const SigmaGrid& grid) {
    p.validate();
    for (double sigma : grid.values) {
        const Coefficients c = coefficients(p, sched.k(sigma), sigma);
        if (!(c.c_out * c.c_out > 1e-300) || !std::isfinite(c.c_out))
            throw ConfigError("precondition: c_out degenerates at sigma=" +
                              std::to_string(sigma) +
                              " (sigma_cov too close to sigma_data*sigma_mu)");
    }
}

Tensor precondition_denoise(const RawNetwork& net, const PreconditionParams& p,
                            const Schedule& sched, const Tensor& x_tilde_seq, double t,
                            const Tensor& cond) {
    if (x_tilde_seq.shape().l != p.seq_len)
        throw ShapeError("denoise: expected " + std::to_string(p.seq_len) +
                         " temporal slices, got " + std::to_string(x_tilde_seq.shape().l));
    const Coefficients c = coefficients(p, sched, t);

    Tensor scaled(x_tilde_seq.shape());
    kern::copy(x_tilde_seq.data(), scaled.data(), x_tilde_seq.size());
    kern::scale(c.c_in, scaled.data(), scaled.size());

    Tensor f_out = net.forward(scaled, c.c_noise, cond);

    const Shape slice{1, x_tilde_seq.shape().c, x_tilde_seq.shape().h, x_tilde_seq.shape().w};
    if (f_out.shape() != slice)
        throw ShapeError("denoise: network output " + f_out.shape().str() +
                         " does not match slice " + slice.str());

    Tensor d(slice);
    const double mean_coef = c.c_skip / p.seq_len;
    for (int l = 0; l < p.seq_len; ++l)
        kern::axpy(mean_coef, x_tilde_seq.slice_data(l), d.data(), d.size());
    kern::axpy(c.c_out, f_out.data(), d.data(), d.size());
    return d;
}

}  // namespace emrdm

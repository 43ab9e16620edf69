#pragma once

#include "emrdm/nets.hpp"
#include "emrdm/schedule.hpp"
#include "emrdm/tensor.hpp"

namespace emrdm {

// Preconditioning statistics. sigma_data/sigma_mu/sigma_cov are scalar
// per-dataset statistics (measured by the pipeline at gen-data time);
// L is the temporal sequence length the denoiser operates on.
struct PreconditionParams {
    double sigma_data = 1.0;
    double sigma_mu = 1.0;
    double sigma_cov = 0.9;
    int seq_len = 1;

    void validate() const;  // positivity + Cauchy-Schwarz
};

struct Coefficients {
    double c_in = 0.0;
    double c_skip = 0.0;
    double c_out = 0.0;
    double c_noise = 0.0;
};

// Core formulas in terms of the mean-reversion ratio k and noise level
// sigma; the schedule overload maps t -> (k(t), sigma(t)).
Coefficients coefficients(const PreconditionParams& p, double k, double sigma);
Coefficients coefficients(const PreconditionParams& p, const Schedule& sched, double t);

// c_out^2 as a function of a free c_skip (before plugging in the
// minimizer); used by the optimality test.
double c_out_sq_for_skip(const PreconditionParams& p, double k, double sigma, double c_skip);

double loss_weight(const PreconditionParams& p, double k, double sigma);  // 1/c_out^2
double loss_weight(const PreconditionParams& p, const Schedule& sched, double t);

// Rejects configurations whose c_out^2 degenerates anywhere on the given
// sigma grid (k taken from the schedule at t = sigma).
void validate_on_grid(const PreconditionParams& p, const Schedule& sched,
                      const SigmaGrid& grid);

// D = mean_l(c_skip * x~^l) + c_out * F({c_in * x~^l}; c_noise; cond).
Tensor precondition_denoise(const RawNetwork& net, const PreconditionParams& p,
                            const Schedule& sched, const Tensor& x_tilde_seq, double t,
                            const Tensor& cond);

class PreconditionedDenoiser : public Denoiser {
public:
    PreconditionedDenoiser(const RawNetwork& net, PreconditionParams p, Schedule sched)
        : net_(net), p_(p), sched_(sched) {}

    Tensor denoise(const Tensor& x_tilde_seq, double t, const Tensor& /*mu_seq*/,
                   const Tensor& cond) const override {
        return precondition_denoise(net_, p_, sched_, x_tilde_seq, t, cond);
    }

private:
    const RawNetwork& net_;
    PreconditionParams p_;
    Schedule sched_;
};

}  // namespace emrdm

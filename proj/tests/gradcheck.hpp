#pragma once

// Central-finite-difference gradient oracle for the toy networks: checks
// every parameter of a RawNetwork against d/dtheta of the squared-error
// probe loss L = 0.5*||F(x) - y||^2.

#include <cmath>
#include <string>

#include "emrdm/nets.hpp"
#include "emrdm/rng.hpp"
#include "emrdm/tensor.hpp"

namespace gradcheck {

struct Result {
    double max_rel = 0.0;
    std::string worst_param;
    size_t checked = 0;
};

inline double probe_loss(const emrdm::RawNetwork& net, const emrdm::Tensor& x,
                         double c_noise, const emrdm::Tensor& cond,
                         const emrdm::Tensor& target) {
    const emrdm::Tensor out = net.forward(x, c_noise, cond);
    double acc = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - target[i];
        acc += d * d;
    }
    return 0.5 * acc;
}

inline Result check_all_params(emrdm::RawNetwork& net, const emrdm::Tensor& x,
                               double c_noise, const emrdm::Tensor& cond, uint64_t seed) {
    emrdm::Rng rng = emrdm::Rng::stream(seed, "gradcheck_target");
    const emrdm::Tensor probe = net.forward(x, c_noise, cond);
    emrdm::Tensor target = emrdm::Tensor::randn(probe.shape(), rng);

    // Analytic gradients.
    net.zero_grads();
    const emrdm::Tensor out = net.forward_train(x, c_noise, cond);
    emrdm::Tensor dout(out.shape());
    for (size_t i = 0; i < out.size(); ++i) dout[i] = out[i] - target[i];
    net.backward(dout);

    Result r;
    for (emrdm::Param* p : net.params()) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            const double theta = p->value[i];
            const double h = 1e-5 * std::max(1.0, std::fabs(theta));
            p->value[i] = theta + h;
            const double lp = probe_loss(net, x, c_noise, cond, target);
            p->value[i] = theta - h;
            const double lm = probe_loss(net, x, c_noise, cond, target);
            p->value[i] = theta;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = p->grad[i];
            const double rel = std::fabs(fd - an) / std::max(std::fabs(fd) + std::fabs(an), 1e-6);
            if (rel > r.max_rel) {
                r.max_rel = rel;
                r.worst_param = p->name + "[" + std::to_string(i) + "]";
            }
            ++r.checked;
        }
    }
    return r;
}

}  // namespace gradcheck

#pragma once

#include <vector>

namespace emrdm {

enum class ScheduleKind { MeanReverting, Generative };

// Diffusion schedule. The mean-reverting variant uses s(t) = 1/(1+alpha*t)
// and sigma(t) = t; setting s(t) = 1 (Generative) recovers the plain
// generative diffusion schedule with the same sigma.
struct Schedule {
    ScheduleKind kind = ScheduleKind::MeanReverting;
    double alpha = 3.0;

    static Schedule mean_reverting(double alpha);
    static Schedule generative();

    double s(double t) const;       // scale s(t); s(0) = 1
    double s_dot(double t) const;   // ds/dt
    double k(double t) const;       // (1 - s)/s; alpha*t for mean-reverting
    double sigma(double t) const;   // sigma(t) = t
    double sigma_dot(double t) const;

    // SDE coefficients f(t) = s_dot/s, g(t) = s*sqrt(2*sigma_dot*sigma).
    // t = 0 returns the g -> 0 limit so integrators can start at the origin.
    void drift_diffusion(double t, double& f, double& g) const;
};

// Noise-level grid for samplers: values[0] = sigma_max, values[n-1] =
// sigma_min, strictly decreasing, interpolated with the rho-power rule.
struct SigmaGrid {
    std::vector<double> values;
    double rho = 7.0;

    size_t size() const { return values.size(); }
    double operator[](size_t i) const { return values[i]; }
};

SigmaGrid make_sigma_grid(double sigma_min, double sigma_max, int n, double rho);

}  // namespace emrdm

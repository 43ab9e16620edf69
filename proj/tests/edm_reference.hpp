#pragma once

// Independently coded EDM reference (straight-line formulas for the
// generative special case): sigma grid, preconditioning, perturbation,
// probability-flow ODE and the Euler sampler. Used as the dual
// implementation the s(t)=1 reduction is checked against. Kept free of
// any production types on purpose.

#include <cmath>
#include <functional>
#include <vector>

namespace edm_ref {

inline std::vector<double> sigma_grid(double sigma_min, double sigma_max, int n, double rho) {
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / (n - 1);
        g[i] = std::pow(std::pow(sigma_max, 1.0 / rho) +
                            frac * (std::pow(sigma_min, 1.0 / rho) -
                                    std::pow(sigma_max, 1.0 / rho)),
                        rho);
    }
    g.front() = sigma_max;
    g.back() = sigma_min;
    return g;
}

struct Coeffs {
    double c_in, c_skip, c_out, c_noise;
};

inline Coeffs coefficients(double sigma_data, double sigma) {
    Coeffs c{};
    const double sd2 = sigma_data * sigma_data;
    c.c_in = 1.0 / std::sqrt(sigma * sigma + sd2);
    c.c_skip = sd2 / (sigma * sigma + sd2);
    c.c_out = sigma * sigma_data / std::sqrt(sigma * sigma + sd2);
    c.c_noise = 0.25 * std::log(sigma);
    return c;
}

inline double perturb(double x0, double sigma, double eps) { return x0 + sigma * eps; }

inline double ode_rhs(double x, double denoised, double t) { return (x - denoised) / t; }

// Gaussian-prior oracle denoiser: D = m + sd^2/(sd^2+t^2) * (x - m).
inline double oracle(double x, double t, double m, double sigma_data) {
    const double sd2 = sigma_data * sigma_data;
    return m + sd2 / (sd2 + t * t) * (x - m);
}

// Deterministic Euler sampler from explicit start states; records the
// pre-step state at every iteration.
inline std::vector<std::vector<double>> sample_trajectory(
    std::vector<double> x, const std::vector<double>& grid,
    const std::function<std::vector<double>(const std::vector<double>&, double)>& denoise) {
    std::vector<std::vector<double>> seen;
    for (size_t i = 0; i + 1 < grid.size(); ++i) {
        const double t = grid[i];
        const double t_next = grid[i + 1];
        seen.push_back(x);
        const std::vector<double> d = denoise(x, t);
        for (size_t j = 0; j < x.size(); ++j)
            x[j] += (t_next - t) * ode_rhs(x[j], d[j], t);
    }
    seen.push_back(x);  // final state
    return seen;
}

}  // namespace edm_ref

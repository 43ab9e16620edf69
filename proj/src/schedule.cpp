#include "emrdm/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "emrdm/errors.hpp"

namespace emrdm {

namespace {

void require_nonneg_t(double t, const char* what) {
    if (!(t >= 0.0))
        throw std::domain_error(std::string(what) + ": t must be >= 0, got " +
                                std::to_string(t));
}

}  // namespace

Schedule Schedule::mean_reverting(double alpha) {
    if (!(alpha > 0.0))
        throw ConfigError("schedule: alpha must be > 0, got " + std::to_string(alpha));
    return Schedule{ScheduleKind::MeanReverting, alpha};
}

Schedule Schedule::generative() { return Schedule{ScheduleKind::Generative, 0.0}; }

double Schedule::s(double t) const {
    require_nonneg_t(t, "s(t)");
    if (kind == ScheduleKind::Generative) return 1.0;
    return 1.0 / (1.0 + alpha * t);
}

double Schedule::s_dot(double t) const {
    require_nonneg_t(t, "s_dot(t)");
    if (kind == ScheduleKind::Generative) return 0.0;
    const double u = 1.0 + alpha * t;
    return -alpha / (u * u);
}

double Schedule::k(double t) const {
    require_nonneg_t(t, "k(t)");
    if (kind == ScheduleKind::Generative) return 0.0;
    return alpha * t;  // (1-s)/s in closed form
}

double Schedule::sigma(double t) const {
    require_nonneg_t(t, "sigma(t)");
    return t;
}

double Schedule::sigma_dot(double t) const {
    require_nonneg_t(t, "sigma_dot(t)");
    return 1.0;
}

void Schedule::drift_diffusion(double t, double& f, double& g) const {
    if (t < 0.0)
        throw std::domain_error("drift_diffusion: t must be >= 0, got " + std::to_string(t));
    f = s_dot(t) / s(t);
    g = (t == 0.0) ? 0.0 : s(t) * std::sqrt(2.0 * sigma_dot(t) * sigma(t));
}

SigmaGrid make_sigma_grid(double sigma_min, double sigma_max, int n, double rho) {
    if (n < 2) throw ConfigError("sigma grid: need at least 2 levels, got " + std::to_string(n));
    if (!(sigma_min > 0.0) || !(sigma_max > 0.0))
        throw ConfigError("sigma grid: sigma_min and sigma_max must be > 0");
    if (!(sigma_min < sigma_max))
        throw ConfigError("sigma grid: sigma_min must be < sigma_max");
    if (!(rho > 0.0)) throw ConfigError("sigma grid: rho must be > 0");

    SigmaGrid grid;
    grid.rho = rho;
    grid.values.resize(n);
    const double inv_rho = 1.0 / rho;
    const double hi = std::pow(sigma_max, inv_rho);
    const double lo = std::pow(sigma_min, inv_rho);
    for (int i = 0; i < n; ++i) {
        const double frac = static_cast<double>(i) / (n - 1);
        grid.values[i] = std::pow(hi + frac * (lo - hi), rho);
    }
    // Endpoints anchored exactly; pow round-trips are not.
    grid.values.front() = sigma_max;
    grid.values.back() = sigma_min;
    return grid;
}

}  // namespace emrdm

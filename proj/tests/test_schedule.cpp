#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "emrdm/errors.hpp"
#include "emrdm/schedule.hpp"

using namespace emrdm;

TEST_CASE("s(t) closed forms") {
    const Schedule mr = Schedule::mean_reverting(3.0);
    CHECK(mr.s(0.0) == 1.0);
    CHECK(mr.s(2.0) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
    const Schedule gen = Schedule::generative();
    CHECK(gen.s(5.0) == 1.0);
    CHECK_THROWS_AS(mr.s(-0.1), std::domain_error);
}

TEST_CASE("k(t) closed forms") {
    const Schedule mr = Schedule::mean_reverting(3.0);
    CHECK(mr.k(0.0) == 0.0);
    CHECK(mr.k(2.0) == 6.0);
    CHECK(Schedule::generative().k(2.0) == 0.0);
    CHECK_THROWS_AS(mr.k(-1.0), std::domain_error);
}

TEST_CASE("sigma and derivatives") {
    const Schedule mr = Schedule::mean_reverting(3.0);
    CHECK(mr.sigma(0.5) == 0.5);
    CHECK(mr.sigma(0.0) == 0.0);
    CHECK(mr.sigma_dot(0.7) == 1.0);
    CHECK(mr.s_dot(1.0) == doctest::Approx(-0.1875).epsilon(1e-15));
    CHECK(Schedule::generative().s_dot(1.0) == 0.0);

    // -s_dot/s^2 = alpha identically.
    for (double t : {1e-4, 0.01, 0.3, 1.0, 10.0, 1e3}) {
        const double s = mr.s(t);
        CHECK(-mr.s_dot(t) / (s * s) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("drift and diffusion coefficients") {
    const Schedule mr = Schedule::mean_reverting(3.0);
    double f = 0.0, g = 0.0;
    mr.drift_diffusion(1.0, f, g);
    CHECK(f == doctest::Approx(-0.75).epsilon(1e-15));
    CHECK(g == doctest::Approx(0.25 * std::sqrt(2.0)).epsilon(1e-15));

    const Schedule gen = Schedule::generative();
    gen.drift_diffusion(2.5, f, g);
    CHECK(f == 0.0);

    mr.drift_diffusion(0.0, f, g);  // g limit at the origin
    CHECK(g == 0.0);
    CHECK_THROWS_AS(mr.drift_diffusion(-1e-9, f, g), std::domain_error);
}

TEST_CASE("sigma(t)^2 equals the integral of (g/s)^2") {
    // Trapezoid quadrature of (g/s)^2 = 2*sigma_dot*sigma, an exactly
    // linear integrand, so the discretization is exact up to round-off.
    const Schedule mr = Schedule::mean_reverting(3.0);
    for (double t_end : {0.1, 1.0, 10.0}) {
        const int n = 20000;
        const double h = t_end / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double t = i * h;
            double f = 0.0, g = 0.0;
            mr.drift_diffusion(t, f, g);
            const double integrand = (g / mr.s(t)) * (g / mr.s(t));
            acc += (i == 0 || i == n) ? 0.5 * integrand : integrand;
        }
        acc *= h;
        const double expect = mr.sigma(t_end) * mr.sigma(t_end);
        CHECK(std::fabs(acc - expect) / expect < 1e-4);
    }
}

TEST_CASE("k*s + s = 1 on a log grid") {
    for (double alpha : {0.5, 3.0}) {
        const Schedule mr = Schedule::mean_reverting(alpha);
        for (double t = 1e-4; t <= 1e3; t *= 3.7) {
            const double v = mr.k(t) * mr.s(t) + mr.s(t);
            CHECK(std::fabs(v - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("monotonicity of s and sigma") {
    const Schedule mr = Schedule::mean_reverting(2.0);
    double prev_s = 2.0, prev_sig = -1.0;
    for (double t = 0.0; t < 20.0; t += 0.37) {
        CHECK(mr.s(t) < prev_s);
        CHECK(mr.s(t) > 0.0);
        CHECK(mr.s(t) <= 1.0);
        CHECK(mr.sigma(t) > prev_sig);
        prev_s = mr.s(t);
        prev_sig = mr.sigma(t);
    }
}

TEST_CASE("sigma grid endpoints and interpolation") {
    const SigmaGrid g2 = make_sigma_grid(0.001, 100.0, 2, 7.0);
    REQUIRE(g2.size() == 2);
    CHECK(g2[0] == 100.0);
    CHECK(g2[1] == 0.001);

    const SigmaGrid g5 = make_sigma_grid(0.001, 100.0, 5, 7.0);
    CHECK(g5[2] == doctest::Approx(2.688).epsilon(1e-3));
    for (size_t i = 0; i + 1 < g5.size(); ++i) CHECK(g5[i] > g5[i + 1]);

    // Strictly decreasing and within bounds for assorted configs.
    for (double rho : {1.0, 3.0, 7.0})
        for (int n : {2, 5, 33}) {
            const SigmaGrid g = make_sigma_grid(0.01, 80.0, n, rho);
            CHECK(g[0] == 80.0);
            CHECK(g[g.size() - 1] == 0.01);
            for (size_t i = 0; i + 1 < g.size(); ++i) {
                CHECK(g[i] > g[i + 1]);
                CHECK(g[i] <= 80.0);
                CHECK(g[i + 1] >= 0.01);
            }
        }
}

TEST_CASE("sigma grid configuration errors") {
    CHECK_THROWS_AS(make_sigma_grid(0.001, 100.0, 1, 7.0), ConfigError);
    CHECK_THROWS_AS(make_sigma_grid(0.0, 100.0, 5, 7.0), ConfigError);
    CHECK_THROWS_AS(make_sigma_grid(-1.0, 100.0, 5, 7.0), ConfigError);
    CHECK_THROWS_AS(make_sigma_grid(100.0, 100.0, 5, 7.0), ConfigError);
    CHECK_THROWS_AS(make_sigma_grid(0.001, 100.0, 5, 0.0), ConfigError);
    CHECK_THROWS_AS(Schedule::mean_reverting(0.0), ConfigError);
}

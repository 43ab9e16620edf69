#include <doctest.h>

#include <cmath>
#include <vector>

#include "edm_reference.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/sampler.hpp"

using namespace emrdm;

namespace {

SamplerConfig toy_cfg() {
    SamplerConfig cfg;
    cfg.n_steps = 6;
    cfg.s_churn = 0.0;
    cfg.sigma_min = 0.01;
    cfg.sigma_max = 10.0;
    cfg.s_tmax = 10.0;
    cfg.rho = 7.0;
    cfg.seed = 7;
    return cfg;
}

// Wraps a denoiser and records every (t, state) it is called with.
class RecordingDenoiser : public Denoiser {
public:
    explicit RecordingDenoiser(const Denoiser& inner) : inner_(inner) {}
    Tensor denoise(const Tensor& x, double t, const Tensor& mu,
                   const Tensor& cond) const override {
        ts_.push_back(t);
        states_.push_back(x);
        return inner_.denoise(x, t, mu, cond);
    }
    mutable std::vector<double> ts_;
    mutable std::vector<Tensor> states_;

private:
    const Denoiser& inner_;
};

}  // namespace

TEST_CASE("config validation") {
    SamplerConfig cfg = toy_cfg();
    CHECK_NOTHROW(cfg.validate());
    cfg.n_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_cfg();
    cfg.sigma_min = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_cfg();
    cfg.s_churn = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_cfg();
    cfg.s_noise = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = toy_cfg();
    cfg.s_tmin = 5.0;
    cfg.s_tmax = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("time grid has n_steps+1 levels hitting both endpoints") {
    const SamplerConfig cfg = toy_cfg();
    const SigmaGrid g = cfg.time_grid();
    REQUIRE(g.size() == static_cast<size_t>(cfg.n_steps + 1));
    CHECK(g[0] == cfg.sigma_max);
    CHECK(g[g.size() - 1] == cfg.sigma_min);
}

TEST_CASE("init_states mean and noise independence") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    SamplerConfig cfg = toy_cfg();
    cfg.sigma_max = 2.0;

    const int n = 10000;
    const Tensor mu(Shape{2, 1, 100, 100}, 1.0);
    const Tensor x = init_states(mu, sched, cfg, 99);

    // E[x] = k(sigma_max)*mu within 2% over 1e4 pixels per slice.
    const double expect = sched.k(2.0) * 1.0;
    for (int l = 0; l < 2; ++l) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += x.slice_data(l)[i];
        mean /= n;
        CHECK(std::fabs(mean - expect) <= 0.02 * expect);
    }

    // Distinct slices carry uncorrelated noise.
    double dot = 0.0, n0 = 0.0, n1 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e0 = (x.slice_data(0)[i] - expect) / 2.0;
        const double e1 = (x.slice_data(1)[i] - expect) / 2.0;
        dot += e0 * e1;
        n0 += e0 * e0;
        n1 += e1 * e1;
    }
    CHECK(std::fabs(dot / std::sqrt(n0 * n1)) < 0.03);
}

TEST_CASE("init_states vanishes in the small-sigma_max, k->0 limit") {
    SamplerConfig cfg = toy_cfg();
    cfg.sigma_max = 1e-9;
    cfg.sigma_min = 1e-12;
    const Tensor mu(Shape{1, 1, 2, 2}, 1.0);
    const Tensor x = init_states(mu, Schedule::generative(), cfg, 3);
    for (size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(x[i]) < 1e-7);
}

TEST_CASE("churn hand values") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    // gamma = 0: no-op.
    {
        Tensor x(Shape{1, 1, 1, 1}, 1.25);
        const Tensor mu(Shape{1, 1, 1, 1}, 1.0);
        const double t_hat = churn_state(x, mu, sched, 1.0, 0.0, 1.0, 5, 0);
        CHECK(t_hat == 1.0);
        CHECK(x[0] == 1.25);
    }
    // gamma = 1 with silenced noise: t_hat = 2, shift (k(2)-k(1))*mu = 3.
    {
        Tensor x(Shape{1, 1, 1, 1}, 1.25);
        const Tensor mu(Shape{1, 1, 1, 1}, 1.0);
        const double t_hat = churn_state(x, mu, sched, 1.0, 1.0, 0.0, 5, 0);
        CHECK(t_hat == 2.0);
        CHECK(x[0] == doctest::Approx(4.25).epsilon(1e-15));
    }
}

TEST_CASE("churn gamma respects the s_tmin/s_tmax window") {
    SamplerConfig cfg = toy_cfg();
    cfg.s_churn = 2.0;
    cfg.s_tmin = 0.5;
    cfg.s_tmax = 5.0;
    CHECK(churn_gamma(cfg, 1.0) == doctest::Approx(2.0 / 6.0));
    CHECK(churn_gamma(cfg, 0.1) == 0.0);
    CHECK(churn_gamma(cfg, 9.0) == 0.0);
    cfg.s_churn = 0.0;
    CHECK(churn_gamma(cfg, 1.0) == 0.0);
}

TEST_CASE("deterministic sampler is bit-reproducible and ignores s_noise") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    const GaussianOracleDenoiser oracle({0.0, 1.0}, sched);
    const Tensor mu(Shape{1, 1, 4, 4}, 0.5);

    SamplerConfig cfg = toy_cfg();
    const Tensor a = sample(oracle, mu, Tensor(), sched, cfg);
    const Tensor b = sample(oracle, mu, Tensor(), sched, cfg);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

    cfg.s_noise = 777.0;  // unused when s_churn = 0
    const Tensor c = sample(oracle, mu, Tensor(), sched, cfg);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == c[i]);
}

TEST_CASE("trace records the churned schedule and monotone noise levels") {
    const Schedule sched = Schedule::mean_reverting(3.0);
    const GaussianOracleDenoiser oracle({0.0, 1.0}, sched);
    const Tensor mu(Shape{1, 1, 4, 4}, 0.5);

    SamplerConfig cfg = toy_cfg();
    cfg.s_churn = 1.2;
    std::vector<TraceRow> trace;
    sample(oracle, mu, Tensor(), sched, cfg, &trace);
    REQUIRE(trace.size() == static_cast<size_t>(cfg.n_steps));
    const SigmaGrid grid = cfg.time_grid();
    const double gamma = cfg.s_churn / cfg.n_steps;
    for (size_t i = 0; i < trace.size(); ++i) {
        CHECK(trace[i].t == grid[i]);
        CHECK(trace[i].t_hat >= trace[i].t);           // churn lifts noise
        CHECK(trace[i].t_hat <= (1.0 + gamma) * trace[i].t + 1e-12);
        if (i + 1 < trace.size()) CHECK(trace[i].t > trace[i + 1].t);
    }
    // First denoiser call sees the churn-adjusted sigma_max.
    CHECK(trace[0].t_hat == doctest::Approx((1.0 + gamma) * cfg.sigma_max).epsilon(1e-15));
}

TEST_CASE("temporal mean fusion for identical slices is the single-slice result") {
    const Schedule sched = Schedule::mean_reverting(2.0);
    const GaussianOracleDenoiser oracle({0.0, 1.0}, sched);
    SamplerConfig cfg = toy_cfg();

    const Tensor mu1(Shape{1, 1, 2, 2}, 0.3);
    const Tensor out1 = sample_loop(init_states(mu1, sched, cfg, 4), oracle, mu1, Tensor(),
                                    sched, cfg);
    // Two identical slices with identical init noise fuse to the same image.
    Tensor mu2(Shape{2, 1, 2, 2}, 0.3);
    Tensor init2(Shape{2, 1, 2, 2});
    const Tensor init1 = init_states(mu1, sched, cfg, 4);
    init2.set_time_slice(0, init1);
    init2.set_time_slice(1, init1);
    const Tensor out2 = sample_loop(init2, oracle, mu2, Tensor(), sched, cfg);
    for (size_t i = 0; i < out1.size(); ++i)
        CHECK(out2[i] == doctest::Approx(out1[i]).epsilon(1e-12));
}

TEST_CASE("generative sampler matches the independent EDM reference per step") {
    const Schedule gen = Schedule::generative();
    const double sd = 1.0, m = 0.0;
    const GaussianOracleDenoiser oracle({m, sd}, gen);

    SamplerConfig cfg;
    cfg.n_steps = 20;
    cfg.s_churn = 0.0;
    cfg.sigma_min = 0.02;
    cfg.sigma_max = 10.0;
    cfg.rho = 7.0;
    cfg.seed = 12345;

    const Tensor mu(Shape{1, 1, 3, 3}, 0.4);  // k = 0, so mu is inert
    const Tensor init = init_states(mu, gen, cfg, cfg.seed);

    RecordingDenoiser rec(oracle);
    const Tensor out = sample_loop(init, rec, mu, Tensor(), gen, cfg);

    // Independent EDM Euler trajectory from the same start.
    const std::vector<double> grid =
        edm_ref::sigma_grid(cfg.sigma_min, cfg.sigma_max, cfg.n_steps + 1, cfg.rho);
    std::vector<double> x0(init.data(), init.data() + init.size());
    const auto traj = edm_ref::sample_trajectory(
        x0, grid, [&](const std::vector<double>& x, double t) {
            std::vector<double> d(x.size());
            for (size_t i = 0; i < x.size(); ++i) d[i] = edm_ref::oracle(x[i], t, m, sd);
            return d;
        });

    REQUIRE(rec.states_.size() == static_cast<size_t>(cfg.n_steps));
    double worst = 0.0;
    for (int i = 0; i < cfg.n_steps; ++i)
        for (size_t j = 0; j < out.size(); ++j)
            worst = std::max(worst, std::fabs(rec.states_[i][j] - traj[i][j]));
    for (size_t j = 0; j < out.size(); ++j)
        worst = std::max(worst, std::fabs(out[j] - traj.back()[j]));
    CHECK(worst < 1e-10);
}

TEST_CASE("sigma grid interpolation matches the EDM reference") {
    const auto ours = make_sigma_grid(0.002, 80.0, 12, 7.0);
    const auto ref = edm_ref::sigma_grid(0.002, 80.0, 12, 7.0);
    for (size_t i = 0; i < ours.size(); ++i)
        CHECK(std::fabs(ours[i] - ref[i]) <= 1e-12 * std::max(1.0, ref[i]));
}

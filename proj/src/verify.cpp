#include "emrdm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "emrdm/diffusion.hpp"
#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"
#include "emrdm/nets.hpp"
#include "emrdm/precondition.hpp"
#include "emrdm/rng.hpp"
#include "emrdm/sampler.hpp"
#include "emrdm/schedule.hpp"

namespace emrdm {

namespace {

constexpr uint64_t kVerifySeed = 20240915;

void add_check(std::vector<CheckResult>& out, const std::string& suite,
               const std::string& name, double measured, double tolerance) {
    out.push_back(CheckResult{suite, name, measured, tolerance,
                              measured <= tolerance && std::isfinite(measured)});
}

// Sample moments with plain sequential accumulation so results do not
// depend on the active kernel backend.
void moments(const double* x, size_t n, double& mean, double& sd) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += x[i];
    mean = s / static_cast<double>(n);
    double ss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        ss += d * d;
    }
    sd = std::sqrt(ss / static_cast<double>(n - 1));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

// ------------------------- kernel suite -------------------------------

std::vector<CheckResult> suite_kernel() {
    std::vector<CheckResult> out;
    const size_t n = 100000;
    const double x0v = 0.3, muv = 1.0;
    const Tensor x0(Shape{1, 1, 1, static_cast<int>(n)}, x0v);
    const Tensor mu(Shape{1, 1, 1, static_cast<int>(n)}, muv);

    int cfg_id = 0;
    for (double alpha : {1.0, 3.0}) {
        const Schedule sched = Schedule::mean_reverting(alpha);
        for (double t : {0.1, 0.5, 1.0, 3.0}) {
            Rng rng = Rng::stream(kVerifySeed, "kernel_moments", cfg_id++);
            const Tensor x = perturb(x0, mu, sched, t, rng);
            double mean = 0.0, sd = 0.0;
            moments(x.data(), n, mean, sd);

            const double em = x0v + sched.k(t) * muv;
            const double es = sched.sigma(t);
            std::ostringstream tag;
            tag << "a=" << alpha << " t=" << t;
            const double mean_tol =
                std::max(0.02 * std::fabs(em), 4.0 * es / std::sqrt(double(n)));
            add_check(out, "kernel", "perturb mean " + tag.str(), std::fabs(mean - em),
                      mean_tol);
            add_check(out, "kernel", "perturb std " + tag.str(),
                      std::fabs(sd - es) / es, 0.02);
        }
    }
    return out;
}

// --------------------------- sde suite --------------------------------

std::vector<CheckResult> suite_sde() {
    std::vector<CheckResult> out;
    const size_t n = 100000;
    const int steps = 1000;
    const double x0v = 0.8, muv = -0.4;
    const Tensor x0(Shape{1, 1, 1, static_cast<int>(n)}, x0v);
    const Tensor mu(Shape{1, 1, 1, static_cast<int>(n)}, muv);

    struct Cfg {
        double alpha, t;
    };
    int cfg_id = 0;
    for (const Cfg c : {Cfg{3.0, 1.0}, Cfg{1.0, 0.5}}) {
        const Schedule sched = Schedule::mean_reverting(c.alpha);
        const Tensor x = simulate_forward_sde(x0, mu, sched, c.t, steps,
                                              derive_stream(kVerifySeed, "sde", cfg_id++));
        double mean = 0.0, sd = 0.0;
        moments(x.data(), n, mean, sd);

        const double s = sched.s(c.t);
        const double em = muv + s * (x0v - muv);  // = s*(x0 + k*mu)
        const double es = s * sched.sigma(c.t);
        std::ostringstream tag;
        tag << "a=" << c.alpha << " t=" << c.t;
        const double mean_tol =
            std::max(0.03 * std::fabs(em), 4.0 * es / std::sqrt(double(n)));
        add_check(out, "sde", "em mean " + tag.str(), std::fabs(mean - em), mean_tol);
        add_check(out, "sde", "em std " + tag.str(), std::fabs(sd - es) / es, 0.03);
    }

    // Deterministic mean path (diffusion silenced): x -> mu + s(t)(x0-mu),
    // here 1/7 exactly; the step-halving ratio confirms first-order
    // convergence to that limit.
    {
        const Schedule sched = Schedule::mean_reverting(3.0);
        const Tensor x0s = Tensor::scalar(1.0);
        const Tensor mus = Tensor::scalar(0.0);
        const double expect = 1.0 / 7.0;
        const double e4k =
            std::fabs(simulate_forward_sde(x0s, mus, sched, 2.0, 4000, 0, 0.0)[0] - expect);
        const double e8k =
            std::fabs(simulate_forward_sde(x0s, mus, sched, 2.0, 8000, 0, 0.0)[0] - expect);
        add_check(out, "sde", "mean path a=3 t=2 (8k steps)", e8k / expect, 2e-3);
        add_check(out, "sde", "mean path halving ratio", std::fabs(e4k / e8k - 2.0), 0.1);
    }
    return out;
}

// -------------------------- score suite -------------------------------

std::vector<CheckResult> suite_score() {
    std::vector<CheckResult> out;

    // Spec point: x0 ~ N(0,1), mu=0, sigma=1, x~=2 -> score -1 via D*=1.
    {
        const Schedule sched = Schedule::mean_reverting(3.0);
        const GaussianOracleParams p{0.0, 1.0};
        const Tensor xt = Tensor::scalar(2.0);
        const Tensor mu = Tensor::scalar(0.0);
        const double t = 1.0;
        const Tensor d = oracle_denoise(p, xt, mu, sched, t);
        const Tensor s = score_from_denoiser(xt, d, mu, sched, t);
        add_check(out, "score", "gaussian point (D*=1, score=-1)",
                  std::max(std::fabs(d[0] - 1.0), std::fabs(s[0] + 1.0)), 1e-12);
    }

    // Grid: formula score equals the analytic marginal score, and equals
    // s(t) times the x-space score.
    const GaussianOracleParams p{0.2, 1.3};
    const double muv = 0.7;
    const Schedule sched = Schedule::mean_reverting(3.0);
    double worst_marginal = 0.0, worst_scaling = 0.0;
    for (double sig : {0.3, 1.0, 2.0})
        for (double xv : {-1.0, 0.5, 2.0}) {
            const double t = sig;
            const Tensor xt = Tensor::scalar(xv);
            const Tensor mu = Tensor::scalar(muv);
            const Tensor d = oracle_denoise(p, xt, mu, sched, t);
            const Tensor s = score_from_denoiser(xt, d, mu, sched, t);

            const double k = sched.k(t);
            const double var = p.sigma_data * p.sigma_data + sig * sig;
            const double analytic = -(xv - k * muv - p.m) / var;
            worst_marginal = std::max(worst_marginal, std::fabs(s[0] - analytic));

            // x-space marginal: x = s*x~, mean s*(m+k*mu), var s^2*(sd^2+sig^2).
            const double sv = sched.s(t);
            const double xspace =
                -(sv * xv - sv * (p.m + k * muv)) / (sv * sv * var);
            worst_scaling = std::max(worst_scaling, std::fabs(s[0] - sv * xspace));
        }
    add_check(out, "score", "marginal score identity", worst_marginal, 1e-12);
    add_check(out, "score", "x-space scaling s(t)*score", worst_scaling, 1e-12);
    return out;
}

// ------------------------- precond suite ------------------------------

std::vector<CheckResult> suite_precond() {
    std::vector<CheckResult> out;
    const Schedule sched = Schedule::mean_reverting(3.0);

    // lambda * c_out^2 = 1 on a 100-point log grid.
    {
        double worst = 0.0;
        for (const auto& pp : {PreconditionParams{1.0, 1.0, 0.9, 1},
                               PreconditionParams{1.3, 0.8, 0.5, 3}}) {
            for (int i = 0; i < 100; ++i) {
                const double sig =
                    std::exp(std::log(1e-3) + (std::log(1e2) - std::log(1e-3)) * i / 99.0);
                const double k = sched.k(sig);
                const Coefficients c = coefficients(pp, k, sig);
                const double lw = loss_weight(pp, k, sig);
                worst = std::max(worst, std::fabs(lw * c.c_out * c.c_out - 1.0));
            }
        }
        add_check(out, "precond", "lambda*c_out^2 = 1 (100 sigmas)", worst, 1e-12);
    }

    // Variance normalization under the assumed covariance structure.
    {
        const double sd = 1.0, sm = 1.0, sc = 0.9;
        const size_t n = 100000;
        int cfg_id = 0;
        for (double k : {0.5, 3.0})
            for (double sig : {0.1, 1.0, 10.0})
                for (int L : {1, 3}) {
                    PreconditionParams pp{sd, sm, sc, L};
                    const Coefficients c = coefficients(pp, k, sig);
                    Rng rng = Rng::stream(kVerifySeed, "precond_var", cfg_id++);
                    const double beta = sc / (sd * sd);
                    const double zeta_sd = std::sqrt(sm * sm - sc * sc / (sd * sd));

                    std::vector<double> input(n), target(n);
                    for (size_t i = 0; i < n; ++i) {
                        const double x0 = sd * rng.normal();
                        const double mu = beta * x0 + zeta_sd * rng.normal();
                        double mean_skip = 0.0;
                        double n1 = 0.0;
                        for (int l = 0; l < L; ++l) {
                            const double nl = sig * rng.normal();
                            if (l == 0) n1 = nl;
                            mean_skip += c.c_skip * (x0 + k * mu + nl);
                        }
                        mean_skip /= L;
                        input[i] = c.c_in * (x0 + k * mu + n1);
                        target[i] = (x0 - mean_skip) / c.c_out;
                    }
                    double m1 = 0.0, s1 = 0.0, m2 = 0.0, s2 = 0.0;
                    moments(input.data(), n, m1, s1);
                    moments(target.data(), n, m2, s2);
                    std::ostringstream tag;
                    tag << "k=" << k << " sigma=" << sig << " L=" << L;
                    add_check(out, "precond", "unit input var " + tag.str(),
                              std::fabs(s1 * s1 - 1.0), 0.02);
                    add_check(out, "precond", "unit target var " + tag.str(),
                              std::fabs(s2 * s2 - 1.0), 0.03);
                }
    }

    // c_skip minimizes c_out^2: +-1% perturbations never decrease it.
    {
        Rng rng = Rng::stream(kVerifySeed, "precond_opt");
        double worst_margin = 0.0;
        for (int i = 0; i < 20; ++i) {
            PreconditionParams pp;
            pp.sigma_data = 0.5 + 1.5 * rng.uniform();
            pp.sigma_mu = 0.1 + 1.9 * rng.uniform();
            pp.sigma_cov = (2.0 * rng.uniform() - 1.0) * 0.9 * pp.sigma_data * pp.sigma_mu;
            pp.seq_len = (rng.uniform() < 0.5) ? 1 : 3;
            const double k = 5.0 * rng.uniform();
            const double sig = std::exp(std::log(0.05) + rng.uniform() * std::log(400.0));
            const Coefficients c = coefficients(pp, k, sig);
            const double base = c_out_sq_for_skip(pp, k, sig, c.c_skip);
            for (double f : {0.99, 1.01}) {
                const double perturbed = c_out_sq_for_skip(pp, k, sig, c.c_skip * f);
                worst_margin = std::max(worst_margin, base - perturbed);
            }
        }
        add_check(out, "precond", "c_skip minimizes c_out^2 (20 configs)", worst_margin,
                  1e-12);
    }

    // sigma -> inf with fixed k: c_skip -> 0 and c_in -> 0.
    {
        const PreconditionParams pp{1.0, 1.0, 0.9, 1};
        const Coefficients c = coefficients(pp, 3.0, 1e8);
        add_check(out, "precond", "c_skip -> 0 as sigma -> inf", std::fabs(c.c_skip), 1e-6);
        add_check(out, "precond", "c_in -> 0 as sigma -> inf", std::fabs(c.c_in), 1e-6);
    }
    return out;
}

// -------------------------- churn suite -------------------------------

std::vector<CheckResult> suite_churn() {
    std::vector<CheckResult> out;
    const Schedule sched = Schedule::mean_reverting(3.0);
    const double x0v = 0.4, muv = 1.1, t = 0.8;
    const size_t n = 10000;

    int cfg_id = 0;
    for (double gamma : {0.2, 1.0}) {
        Rng rng = Rng::stream(kVerifySeed, "churn_draw", cfg_id);
        Tensor x(Shape{1, 1, 1, static_cast<int>(n)});
        const double k = sched.k(t);
        for (size_t i = 0; i < n; ++i) x[i] = x0v + k * muv + t * rng.normal();

        const Tensor mu(Shape{1, 1, 1, static_cast<int>(n)}, muv);
        const double t_hat = churn_state(x, mu, sched, t, gamma, 1.0,
                                         derive_stream(kVerifySeed, "churn_eps", cfg_id), 0);
        ++cfg_id;

        // KS distance against the analytic kernel at t_hat.
        std::vector<double> v(x.data(), x.data() + n);
        std::sort(v.begin(), v.end());
        const double m_hat = x0v + sched.k(t_hat) * muv;
        const double s_hat = sched.sigma(t_hat);
        double ks = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double cdf = normal_cdf((v[i] - m_hat) / s_hat);
            const double hi = static_cast<double>(i + 1) / n;
            const double lo = static_cast<double>(i) / n;
            ks = std::max(ks, std::max(std::fabs(cdf - hi), std::fabs(cdf - lo)));
        }
        std::ostringstream tag;
        tag << "gamma=" << gamma;
        add_check(out, "churn", "marginal preservation KS " + tag.str(), ks, 0.02);
    }
    return out;
}

// ------------------------- sampling suite -----------------------------

std::vector<CheckResult> suite_sampling() {
    std::vector<CheckResult> out;
    const Schedule sched = Schedule::mean_reverting(3.0);
    const GaussianOracleParams op{0.0, 1.0};
    const GaussianOracleDenoiser oracle(op, sched);

    SamplerConfig cfg;
    cfg.sigma_min = 0.01;
    cfg.sigma_max = 10.0;
    cfg.rho = 7.0;
    cfg.s_churn = 0.0;
    cfg.seed = derive_stream(kVerifySeed, "sampling");

    const Tensor mu(Shape{1, 1, 4, 4}, 0.7);
    const Tensor cond;  // oracle ignores conditioning
    cfg.n_steps = 8;
    const Tensor init = init_states(mu, sched, cfg, cfg.seed);

    auto run_n = [&](int n_steps) {
        SamplerConfig c = cfg;
        c.n_steps = n_steps;
        return sample_loop(init, oracle, mu, cond, sched, c);
    };
    const Tensor ref = run_n(512);

    auto rms = [](const Tensor& a, const Tensor& b) {
        return std::sqrt(sq_error(a, b) / static_cast<double>(a.size()));
    };
    const double e8 = rms(run_n(8), ref);
    const double e16 = rms(run_n(16), ref);
    const double e32 = rms(run_n(32), ref);
    const double r1 = e8 / e16;
    const double r2 = e16 / e32;
    add_check(out, "sampling", "euler order ratio 8/16 (|r-2|)", std::fabs(r1 - 2.0), 0.3);
    add_check(out, "sampling", "euler order ratio 16/32 (|r-2|)", std::fabs(r2 - 2.0), 0.3);

    // Closed-form endpoint of the probability-flow ODE for the Gaussian
    // oracle: u(t) = u(T) * sqrt((sd^2+t^2)/(sd^2+T^2)) with
    // u = x~ - k(t)mu - m.
    {
        const double sd2 = op.sigma_data * op.sigma_data;
        const double shrink =
            std::sqrt((sd2 + cfg.sigma_min * cfg.sigma_min) /
                      (sd2 + cfg.sigma_max * cfg.sigma_max));
        const double k_min = sched.k(cfg.sigma_min);
        const double k_max = sched.k(cfg.sigma_max);
        Tensor exact(Shape{1, 1, 4, 4});
        for (size_t i = 0; i < exact.size(); ++i) {
            const double u = init[i] - k_max * mu[i] - op.m;
            exact[i] = op.m + k_min * mu[i] + shrink * u;
        }
        double worst = 0.0;
        for (size_t i = 0; i < exact.size(); ++i) {
            const double denom = std::max(1.0, std::fabs(exact[i]));
            worst = std::max(worst, std::fabs(ref[i] - exact[i]) / denom);
        }
        add_check(out, "sampling", "analytic endpoint (N=512)", worst, 0.01);
    }
    return out;
}

}  // namespace

std::vector<std::string> verify_suites() {
    return {"kernel", "sde", "score", "precond", "churn", "sampling"};
}

std::vector<CheckResult> run_verify_suite(const std::string& suite) {
    if (suite == "kernel") return suite_kernel();
    if (suite == "sde") return suite_sde();
    if (suite == "score") return suite_score();
    if (suite == "precond") return suite_precond();
    if (suite == "churn") return suite_churn();
    if (suite == "sampling") return suite_sampling();
    if (suite == "all") return run_all_verify_suites();
    throw ConfigError("verify: unknown suite '" + suite + "'");
}

std::vector<CheckResult> run_all_verify_suites() {
    std::vector<CheckResult> out;
    for (const std::string& s : verify_suites()) {
        auto r = run_verify_suite(s);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

std::string format_check(const CheckResult& c) {
    std::ostringstream os;
    os << (c.pass ? "[PASS] " : "[FAIL] ") << c.suite << ": " << c.name << "  (measured "
       << c.measured << ", tolerance " << c.tolerance << ")";
    return os.str();
}

}  // namespace emrdm

#pragma once

#include <string>
#include <vector>

namespace emrdm {

// One oracle check: a measured error against a pinned tolerance.
struct CheckResult {
    std::string suite;
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Suites: kernel (perturbation-kernel moments), sde (Euler-Maruyama vs
// kernel), score (analytic Gaussian score identities), precond (variance
// normalization + weight identities), churn (marginal preservation),
// sampling (oracle ODE convergence and analytic endpoint).
std::vector<std::string> verify_suites();
std::vector<CheckResult> run_verify_suite(const std::string& suite);
std::vector<CheckResult> run_all_verify_suites();

// Formats one "pass/fail" line per check.
std::string format_check(const CheckResult& c);

}  // namespace emrdm

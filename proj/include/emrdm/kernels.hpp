#pragma once

#include <cstddef>

// Data-parallel inner loops shared by the diffusion, network, and metric
// code. Every kernel has a scalar reference implementation (kern::scalar)
// and, where the target supports it, an AVX2 or NEON variant selected at
// runtime. The dispatched entry points below are what production code
// calls; tests compare each backend against the scalar reference.

namespace emrdm::kern {

enum class Backend { scalar, avx2, neon };

// Backend active for the dispatched entry points. Defaults to the best
// supported one; EMRDM_KERNELS=scalar|avx2|neon|auto overrides at startup.
Backend active_backend();
const char* backend_name(Backend b);
bool backend_supported(Backend b);
// Throws ConfigError if the requested backend is not available.
void set_backend(Backend b);

void fill(double v, double* y, size_t n);
void copy(const double* x, double* y, size_t n);
void scale(double a, double* y, size_t n);                 // y *= a
void add(const double* x, double* y, size_t n);            // y += x
void mul(const double* x, double* y, size_t n);            // y *= x
void axpy(double a, const double* x, double* y, size_t n); // y += a*x
// out = a*x + b*y
void lincomb(double a, const double* x, double b, const double* y, double* out, size_t n);
// out = x + a*y + b*z  (perturbation / churn / Euler-step form)
void triad(const double* x, double a, const double* y, double b, const double* z,
           double* out, size_t n);

double dot(const double* x, const double* y, size_t n);
double sum(const double* x, size_t n);
double sumsq(const double* x, size_t n);
double abs_sum(const double* x, size_t n);
double sqdiff_sum(const double* x, const double* y, size_t n);
double absdiff_sum(const double* x, const double* y, size_t n);
double max_abs(const double* x, size_t n);

namespace scalar {
void fill(double v, double* y, size_t n);
void copy(const double* x, double* y, size_t n);
void scale(double a, double* y, size_t n);
void add(const double* x, double* y, size_t n);
void mul(const double* x, double* y, size_t n);
void axpy(double a, const double* x, double* y, size_t n);
void lincomb(double a, const double* x, double b, const double* y, double* out, size_t n);
void triad(const double* x, double a, const double* y, double b, const double* z,
           double* out, size_t n);
double dot(const double* x, const double* y, size_t n);
double sum(const double* x, size_t n);
double sumsq(const double* x, size_t n);
double abs_sum(const double* x, size_t n);
double sqdiff_sum(const double* x, const double* y, size_t n);
double absdiff_sum(const double* x, const double* y, size_t n);
double max_abs(const double* x, size_t n);
}  // namespace scalar

}  // namespace emrdm::kern

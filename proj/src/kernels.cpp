#include "emrdm/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "emrdm/errors.hpp"
#include "kernels_table.hpp"

namespace emrdm::kern {

namespace scalar {

void fill(double v, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = v;
}

void copy(const double* x, double* y, size_t n) {
    std::memcpy(y, x, n * sizeof(double));
}

void scale(double a, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= a;
}

void add(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += x[i];
}

void mul(const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] *= x[i];
}

void axpy(double a, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void lincomb(double a, const double* x, double b, const double* y, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void triad(const double* x, double a, const double* y, double b, const double* z,
           double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = x[i] + a * y[i] + b * z[i];
}

double dot(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sumsq(const double* x, size_t n) { return dot(x, x, n); }

double abs_sum(const double* x, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::fabs(x[i]);
    return acc;
}

double sqdiff_sum(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

double absdiff_sum(const double* x, const double* y, size_t n) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += std::fabs(x[i] - y[i]);
    return acc;
}

double max_abs(const double* x, size_t n) {
    double m = 0.0;
    for (size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

}  // namespace scalar

namespace {

constexpr OpsTable kScalarOps = {
    scalar::fill,   scalar::copy,       scalar::scale,      scalar::add,
    scalar::mul,    scalar::axpy,       scalar::lincomb,    scalar::triad,
    scalar::dot,    scalar::sum,        scalar::sumsq,      scalar::abs_sum,
    scalar::sqdiff_sum, scalar::absdiff_sum, scalar::max_abs,
};

const OpsTable* g_ops = nullptr;
Backend g_backend = Backend::scalar;

bool try_select(Backend b) {
    switch (b) {
    case Backend::scalar:
        g_ops = &kScalarOps;
        g_backend = Backend::scalar;
        return true;
    case Backend::avx2:
#if defined(EMRDM_HAVE_AVX2)
        if (avx2_runtime_supported()) {
            g_ops = avx2_ops_table();
            g_backend = Backend::avx2;
            return true;
        }
#endif
        return false;
    case Backend::neon:
#if defined(EMRDM_HAVE_NEON)
        g_ops = neon_ops_table();
        g_backend = Backend::neon;
        return true;
#else
        return false;
#endif
    }
    return false;
}

void select_default() {
    const char* env = std::getenv("EMRDM_KERNELS");
    if (env != nullptr && std::string(env) != "auto") {
        const std::string want(env);
        Backend b = Backend::scalar;
        if (want == "avx2") b = Backend::avx2;
        else if (want == "neon") b = Backend::neon;
        else if (want != "scalar")
            throw ConfigError("EMRDM_KERNELS: unknown backend '" + want + "'");
        if (!try_select(b))
            throw ConfigError("EMRDM_KERNELS: backend '" + want + "' not supported on this CPU");
        return;
    }
    if (try_select(Backend::avx2)) return;
    if (try_select(Backend::neon)) return;
    try_select(Backend::scalar);
}

const OpsTable& ops() {
    if (g_ops == nullptr) select_default();
    return *g_ops;
}

}  // namespace

Backend active_backend() {
    ops();
    return g_backend;
}

const char* backend_name(Backend b) {
    switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
    }
    return "?";
}

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
#if defined(EMRDM_HAVE_AVX2)
    if (b == Backend::avx2) return avx2_runtime_supported();
#endif
#if defined(EMRDM_HAVE_NEON)
    if (b == Backend::neon) return true;
#endif
    return false;
}

void set_backend(Backend b) {
    if (!try_select(b))
        throw ConfigError(std::string("kernel backend '") + backend_name(b) +
                          "' not supported on this CPU");
}

void fill(double v, double* y, size_t n) { ops().fill(v, y, n); }
void copy(const double* x, double* y, size_t n) { ops().copy(x, y, n); }
void scale(double a, double* y, size_t n) { ops().scale(a, y, n); }
void add(const double* x, double* y, size_t n) { ops().add(x, y, n); }
void mul(const double* x, double* y, size_t n) { ops().mul(x, y, n); }
void axpy(double a, const double* x, double* y, size_t n) { ops().axpy(a, x, y, n); }
void lincomb(double a, const double* x, double b, const double* y, double* out, size_t n) {
    ops().lincomb(a, x, b, y, out, n);
}
void triad(const double* x, double a, const double* y, double b, const double* z,
           double* out, size_t n) {
    ops().triad(x, a, y, b, z, out, n);
}
double dot(const double* x, const double* y, size_t n) { return ops().dot(x, y, n); }
double sum(const double* x, size_t n) { return ops().sum(x, n); }
double sumsq(const double* x, size_t n) { return ops().sumsq(x, n); }
double abs_sum(const double* x, size_t n) { return ops().abs_sum(x, n); }
double sqdiff_sum(const double* x, const double* y, size_t n) { return ops().sqdiff_sum(x, y, n); }
double absdiff_sum(const double* x, const double* y, size_t n) { return ops().absdiff_sum(x, y, n); }
double max_abs(const double* x, size_t n) { return ops().max_abs(x, n); }

}  // namespace emrdm::kern

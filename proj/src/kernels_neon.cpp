// NEON (aarch64) variants of the kernel table. float64x2_t carries two
// lanes, so the win is smaller than AVX2 but the FMA forms still pay off.

#if defined(EMRDM_HAVE_NEON)

#include <arm_neon.h>

#include <cmath>
#include <cstddef>
#include <cstring>

#include "kernels_table.hpp"

namespace emrdm::kern {

namespace {

void fill_neon(double v, double* y, size_t n) {
    const float64x2_t vv = vdupq_n_f64(v);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vv);
    for (; i < n; ++i) y[i] = v;
}

void copy_neon(const double* x, double* y, size_t n) {
    std::memcpy(y, x, n * sizeof(double));
}

void scale_neon(double a, double* y, size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(va, vld1q_f64(y + i)));
    for (; i < n; ++i) y[i] *= a;
}

void add_neon(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void mul_neon(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void axpy_neon(double a, const double* x, double* y, size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void lincomb_neon(double a, const double* x, double b, const double* y, double* out, size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t t = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(out + i, vfmaq_f64(t, vb, vld1q_f64(y + i)));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void triad_neon(const double* x, double a, const double* y, double b, const double* z,
                double* out, size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    const float64x2_t vb = vdupq_n_f64(b);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t acc = vfmaq_f64(vld1q_f64(x + i), va, vld1q_f64(y + i));
        acc = vfmaq_f64(acc, vb, vld1q_f64(z + i));
        vst1q_f64(out + i, acc);
    }
    for (; i < n; ++i) out[i] = x[i] + a * y[i] + b * z[i];
}

double dot_neon(const double* x, const double* y, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
    double r = vaddvq_f64(acc);
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double sum_neon(const double* x, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double r = vaddvq_f64(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sumsq_neon(const double* x, size_t n) { return dot_neon(x, x, n); }

double abs_sum_neon(const double* x, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
    double r = vaddvq_f64(acc);
    for (; i < n; ++i) r += std::fabs(x[i]);
    return r;
}

double sqdiff_sum_neon(const double* x, const double* y, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double r = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        r += d * d;
    }
    return r;
}

double absdiff_sum_neon(const double* x, const double* y, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc = vaddq_f64(acc, vabsq_f64(d));
    }
    double r = vaddvq_f64(acc);
    for (; i < n; ++i) r += std::fabs(x[i] - y[i]);
    return r;
}

double max_abs_neon(const double* x, size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vmaxq_f64(acc, vabsq_f64(vld1q_f64(x + i)));
    double r = vmaxvq_f64(acc);
    for (; i < n; ++i) r = std::max(r, std::fabs(x[i]));
    return r;
}

constexpr OpsTable kNeonOps = {
    fill_neon,   copy_neon,       scale_neon,      add_neon,
    mul_neon,    axpy_neon,       lincomb_neon,    triad_neon,
    dot_neon,    sum_neon,        sumsq_neon,      abs_sum_neon,
    sqdiff_sum_neon, absdiff_sum_neon, max_abs_neon,
};

}  // namespace

const OpsTable* neon_ops_table() { return &kNeonOps; }

}  // namespace emrdm::kern

#endif  // EMRDM_HAVE_NEON

// AVX2 + FMA variants of the kernel table. Compiled with -mavx2 -mfma;
// selected only after a runtime CPU check, so the binary stays runnable
// on older x86-64.

#if defined(EMRDM_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>
#include <cstddef>
#include <cstring>

#include "kernels_table.hpp"

namespace emrdm::kern {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

inline __m256d abs_pd(__m256d v) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    return _mm256_and_pd(v, mask);
}

void fill_avx2(double v, double* y, size_t n) {
    const __m256d vv = _mm256_set1_pd(v);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) _mm256_storeu_pd(y + i, vv);
    for (; i < n; ++i) y[i] = v;
}

void copy_avx2(const double* x, double* y, size_t n) {
    std::memcpy(y, x, n * sizeof(double));
}

void scale_avx2(double a, double* y, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] *= a;
}

void add_avx2(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void mul_avx2(const double* x, double* y, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void axpy_avx2(double a, const double* x, double* y, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
        y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
        _mm256_storeu_pd(y + i, y0);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void lincomb_avx2(double a, const double* x, double b, const double* y, double* out, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(vb, _mm256_loadu_pd(y + i), t));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void triad_avx2(const double* x, double a, const double* y, double b, const double* z,
                double* out, size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d acc = _mm256_fmadd_pd(va, _mm256_loadu_pd(y + i), _mm256_loadu_pd(x + i));
        acc = _mm256_fmadd_pd(vb, _mm256_loadu_pd(z + i), acc);
        _mm256_storeu_pd(out + i, acc);
    }
    for (; i < n; ++i) out[i] = x[i] + a * y[i] + b * z[i];
}

double dot_avx2(const double* x, const double* y, size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double r = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) r += x[i] * y[i];
    return r;
}

double sum_avx2(const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double r = hsum(acc);
    for (; i < n; ++i) r += x[i];
    return r;
}

double sumsq_avx2(const double* x, size_t n) { return dot_avx2(x, x, n); }

double abs_sum_avx2(const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, abs_pd(_mm256_loadu_pd(x + i)));
    double r = hsum(acc);
    for (; i < n; ++i) r += std::fabs(x[i]);
    return r;
}

double sqdiff_sum_avx2(const double* x, const double* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double r = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        r += d * d;
    }
    return r;
}

double absdiff_sum_avx2(const double* x, const double* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        acc = _mm256_add_pd(acc, abs_pd(d));
    }
    double r = hsum(acc);
    for (; i < n; ++i) r += std::fabs(x[i] - y[i]);
    return r;
}

double max_abs_avx2(const double* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, abs_pd(_mm256_loadu_pd(x + i)));
    double lane[4];
    _mm256_storeu_pd(lane, acc);
    double r = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    for (; i < n; ++i) r = std::max(r, std::fabs(x[i]));
    return r;
}

constexpr OpsTable kAvx2Ops = {
    fill_avx2,   copy_avx2,       scale_avx2,      add_avx2,
    mul_avx2,    axpy_avx2,       lincomb_avx2,    triad_avx2,
    dot_avx2,    sum_avx2,        sumsq_avx2,      abs_sum_avx2,
    sqdiff_sum_avx2, absdiff_sum_avx2, max_abs_avx2,
};

}  // namespace

const OpsTable* avx2_ops_table() { return &kAvx2Ops; }

bool avx2_runtime_supported() {
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

}  // namespace emrdm::kern

#endif  // EMRDM_HAVE_AVX2

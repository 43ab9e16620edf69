#pragma once

#include <cstddef>

// Internal dispatch table shared by the scalar/AVX2/NEON kernel TUs.

namespace emrdm::kern {

struct OpsTable {
    void (*fill)(double, double*, size_t);
    void (*copy)(const double*, double*, size_t);
    void (*scale)(double, double*, size_t);
    void (*add)(const double*, double*, size_t);
    void (*mul)(const double*, double*, size_t);
    void (*axpy)(double, const double*, double*, size_t);
    void (*lincomb)(double, const double*, double, const double*, double*, size_t);
    void (*triad)(const double*, double, const double*, double, const double*, double*, size_t);
    double (*dot)(const double*, const double*, size_t);
    double (*sum)(const double*, size_t);
    double (*sumsq)(const double*, size_t);
    double (*abs_sum)(const double*, size_t);
    double (*sqdiff_sum)(const double*, const double*, size_t);
    double (*absdiff_sum)(const double*, const double*, size_t);
    double (*max_abs)(const double*, size_t);
};

const OpsTable* avx2_ops_table();
bool avx2_runtime_supported();
const OpsTable* neon_ops_table();

}  // namespace emrdm::kern

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "emrdm/metrics.hpp"
#include "emrdm/rng.hpp"

using namespace emrdm;

TEST_CASE("identical images") {
    Rng rng(1);
    const Tensor y = Tensor::randn(Shape{1, 3, 8, 8}, rng);
    CHECK(std::isinf(psnr(y, y, 1.0)));
    CHECK(psnr_display(psnr(y, y, 1.0)) == 99.0);
    CHECK(ssim(y, y) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mae(y, y) == 0.0);
    CHECK(sam(y, y) == 0.0);
}

TEST_CASE("psnr hand values") {
    // RMSE 0.1 at peak 1 -> 20 dB.
    Tensor y(Shape{1, 1, 2, 2}, 0.5);
    Tensor yh(Shape{1, 1, 2, 2}, 0.6);
    CHECK(psnr(y, yh, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    // Uniform offset 0.5 -> about 6.02 dB.
    Tensor y2(Shape{1, 1, 4, 4}, 0.25);
    Tensor y2h(Shape{1, 1, 4, 4}, 0.75);
    CHECK(psnr(y2, y2h, 1.0) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("psnr decreases as noise grows") {
    Rng rng(2);
    const Tensor y = Tensor::randn(Shape{1, 1, 16, 16}, rng);
    double prev = 1e300;
    for (double sd : {0.01, 0.05, 0.2}) {
        Tensor yh = y;
        Rng noise(3);
        for (size_t i = 0; i < yh.size(); ++i) yh[i] += sd * noise.normal();
        const double p = psnr(y, yh, 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("ssim single-window oracle") {
    Rng rng(7);
    const Tensor y = Tensor::randn(Shape{1, 1, 8, 8}, rng);
    Tensor yh = y;
    for (size_t i = 0; i < yh.size(); ++i) yh[i] += 0.3 * rng.normal();

    // Straight-line scalar evaluation on the one global window.
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const double n = 64.0;
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < 64; ++i) {
        ma += y[i];
        mb += yh[i];
    }
    ma /= n;
    mb /= n;
    double va = 0.0, vb = 0.0, cov = 0.0;
    for (size_t i = 0; i < 64; ++i) {
        va += (y[i] - ma) * (y[i] - ma);
        vb += (yh[i] - mb) * (yh[i] - mb);
        cov += (y[i] - ma) * (yh[i] - mb);
    }
    va /= n;
    vb /= n;
    cov /= n;
    const double expect = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                          ((ma * ma + mb * mb + c1) * (va + vb + c2));
    CHECK(ssim(y, yh, c1, c2, 8) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ssim sign flips for anti-correlated images") {
    Rng rng(11);
    Tensor y(Shape{1, 1, 8, 8});
    for (size_t i = 0; i < y.size(); ++i) y[i] = rng.normal();
    const double mean = std::accumulate(y.data(), y.data() + y.size(), 0.0) / y.size();
    for (size_t i = 0; i < y.size(); ++i) y[i] -= mean;  // zero mean
    Tensor yh = y;
    for (size_t i = 0; i < yh.size(); ++i) yh[i] = -yh[i];
    CHECK(ssim(y, yh) < 0.0);
}

TEST_CASE("metric ranges on random pairs") {
    Rng rng(13);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor y = Tensor::randn(Shape{1, 2, 8, 8}, rng);
        Tensor yh = Tensor::randn(Shape{1, 2, 8, 8}, rng);
        const double s = ssim(y, yh);
        CHECK(s >= -1.0);
        CHECK(s <= 1.0);
        const double a = sam(y, yh);
        CHECK(a >= 0.0);
        CHECK(a <= M_PI);
        CHECK(mae(y, yh) >= 0.0);
    }
}

TEST_CASE("mae and sam hand values") {
    Tensor y(Shape{1, 1, 1, 2});
    y[0] = 0.0;
    y[1] = 1.0;
    Tensor yh(Shape{1, 1, 1, 2});
    yh[0] = 1.0;
    yh[1] = 1.0;
    CHECK(mae(y, yh) == 0.5);

    // Orthogonal vectors: angle pi/2.
    Tensor a(Shape{1, 1, 1, 2});
    a[0] = 1.0;
    a[1] = 0.0;
    Tensor b(Shape{1, 1, 1, 2});
    b[0] = 0.0;
    b[1] = 1.0;
    CHECK(sam(a, b) == doctest::Approx(M_PI / 2.0).epsilon(1e-12));

    const Tensor zero(Shape{1, 1, 1, 2});
    CHECK_THROWS_AS(sam(zero, b), std::domain_error);
}

TEST_CASE("metrics are invariant to a common pixel permutation") {
    Rng rng(17);
    const int n = 64;
    Tensor y = Tensor::randn(Shape{1, 1, 8, 8}, rng);
    Tensor yh = Tensor::randn(Shape{1, 1, 8, 8}, rng);

    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), size_t{0});
    for (size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.next_u64() % i]);
    Tensor yp(y.shape()), yhp(yh.shape());
    for (size_t i = 0; i < n; ++i) {
        yp[i] = y[perm[i]];
        yhp[i] = yh[perm[i]];
    }

    // Exact up to summation order: permuting addends moves the last ulp.
    CHECK(mae(y, yh) == doctest::Approx(mae(yp, yhp)).epsilon(1e-14));
    CHECK(psnr(y, yh, 1.0) == doctest::Approx(psnr(yp, yhp, 1.0)).epsilon(1e-14));
    CHECK(sam(y, yh) == doctest::Approx(sam(yp, yhp)).epsilon(1e-14));
    // Global window makes SSIM permutation-invariant too.
    CHECK(ssim(y, yh, 1e-4, 9e-4, 8) == doctest::Approx(ssim(yp, yhp, 1e-4, 9e-4, 8)).epsilon(1e-12));
}

TEST_CASE("evaluate_pair aggregates all four metrics") {
    Rng rng(23);
    const Tensor y = Tensor::randn(Shape{1, 3, 8, 8}, rng);
    Tensor yh = y;
    for (size_t i = 0; i < yh.size(); ++i) yh[i] += 0.05 * rng.normal();
    const MetricReport r = evaluate_pair(y, yh, 1.0);
    CHECK(r.psnr == doctest::Approx(psnr(y, yh, 1.0)));
    CHECK(r.mae == doctest::Approx(mae(y, yh)));
    CHECK(r.sam == doctest::Approx(sam(y, yh)));
    CHECK(r.ssim == doctest::Approx(ssim(y, yh)));
}

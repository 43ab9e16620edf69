#include "emrdm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "emrdm/errors.hpp"
#include "emrdm/kernels.hpp"

namespace emrdm {

double psnr(const Tensor& y, const Tensor& y_hat, double peak) {
    check_same_shape(y, y_hat, "psnr");
    if (!(peak > 0.0)) throw ConfigError("psnr: peak must be > 0");
    const double mse = kern::sqdiff_sum(y.data(), y_hat.data(), y.size()) /
                       static_cast<double>(y.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(peak / std::sqrt(mse));
}

double psnr_display(double value) { return std::min(value, 99.0); }

double ssim(const Tensor& y, const Tensor& y_hat, double c1, double c2, int window) {
    check_same_shape(y, y_hat, "ssim");
    if (window < 1) throw ConfigError("ssim: window must be >= 1");
    const Shape s = y.shape();

    double total = 0.0;
    int count = 0;
    for (int l = 0; l < s.l; ++l)
        for (int c = 0; c < s.c; ++c)
            for (int wy = 0; wy < s.h; wy += window)
                for (int wx = 0; wx < s.w; wx += window) {
                    const int hh = std::min(window, s.h - wy);
                    const int ww = std::min(window, s.w - wx);
                    const double n = static_cast<double>(hh) * ww;
                    double sum_a = 0.0, sum_b = 0.0, sum_aa = 0.0, sum_bb = 0.0, sum_ab = 0.0;
                    for (int yy = 0; yy < hh; ++yy)
                        for (int xx = 0; xx < ww; ++xx) {
                            const double a = y.at(l, c, wy + yy, wx + xx);
                            const double b = y_hat.at(l, c, wy + yy, wx + xx);
                            sum_a += a;
                            sum_b += b;
                            sum_aa += a * a;
                            sum_bb += b * b;
                            sum_ab += a * b;
                        }
                    const double mu_a = sum_a / n;
                    const double mu_b = sum_b / n;
                    const double var_a = sum_aa / n - mu_a * mu_a;
                    const double var_b = sum_bb / n - mu_b * mu_b;
                    const double cov = sum_ab / n - mu_a * mu_b;
                    const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                    const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                    total += num / den;
                    ++count;
                }
    return total / count;
}

double ssim(const Tensor& y, const Tensor& y_hat) {
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    return ssim(y, y_hat, c1, c2, 8);
}

double mae(const Tensor& y, const Tensor& y_hat) {
    check_same_shape(y, y_hat, "mae");
    return kern::absdiff_sum(y.data(), y_hat.data(), y.size()) /
           static_cast<double>(y.size());
}

double sam(const Tensor& y, const Tensor& y_hat) {
    check_same_shape(y, y_hat, "sam");
    const double ny = kern::sumsq(y.data(), y.size());
    const double nh = kern::sumsq(y_hat.data(), y_hat.size());
    if (ny == 0.0 || nh == 0.0)
        throw std::domain_error("sam: zero-norm input");
    const double inner = kern::dot(y.data(), y_hat.data(), y.size());
    const double cosv = std::clamp(inner / std::sqrt(ny * nh), -1.0, 1.0);
    return std::acos(cosv);
}

MetricReport evaluate_pair(const Tensor& y, const Tensor& y_hat, double peak) {
    MetricReport r;
    r.psnr = psnr(y, y_hat, peak);
    r.ssim = ssim(y, y_hat, (0.01 * peak) * (0.01 * peak), (0.03 * peak) * (0.03 * peak), 8);
    r.mae = mae(y, y_hat);
    r.sam = sam(y, y_hat);
    return r;
}

}  // namespace emrdm

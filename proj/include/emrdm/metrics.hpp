#pragma once

#include "emrdm/tensor.hpp"

namespace emrdm {

// Restoration metrics over single images (1,C,H,W) in a common pixel
// range (the pipeline rescales to [0,1] before calling these).

// 20*log10(peak/RMSE); +inf when the images are identical (callers cap
// the display value at 99 dB).
double psnr(const Tensor& y, const Tensor& y_hat, double peak = 1.0);

// Windowed SSIM: per-channel 8x8 non-overlapping windows (partial edge
// windows included), population moments, averaged over windows and
// channels. c1 = (0.01*peak)^2, c2 = (0.03*peak)^2 unless given.
double ssim(const Tensor& y, const Tensor& y_hat, double c1, double c2, int window = 8);
double ssim(const Tensor& y, const Tensor& y_hat);  // peak = 1 constants

double mae(const Tensor& y, const Tensor& y_hat);

// Spectral angle over the flattened vectors: acos(<y,y_hat>/(|y||y_hat|)),
// radians. Zero-norm input is a domain error.
double sam(const Tensor& y, const Tensor& y_hat);

struct MetricReport {
    double psnr = 0.0;
    double ssim = 0.0;
    double mae = 0.0;
    double sam = 0.0;
};

MetricReport evaluate_pair(const Tensor& y, const Tensor& y_hat, double peak = 1.0);

// Display convention for the +inf PSNR sentinel.
double psnr_display(double value);

}  // namespace emrdm

#pragma once

#include <string>

#include "emrdm/tensor.hpp"

namespace emrdm {

// 8-bit PNG previews for human inspection. The compute path never reads
// these back; the float container is the authoritative format.
// Input values are expected in [0,1]; they are clamped and quantized.
// 1-channel tensors map to grayscale, 3+ to RGB (first three channels).
void write_png_preview(const std::string& path, const Tensor& image, int time_slice = 0);

}  // namespace emrdm

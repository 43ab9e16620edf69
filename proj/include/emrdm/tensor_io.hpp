#pragma once

#include <string>
#include <utility>
#include <vector>

#include "emrdm/tensor.hpp"

namespace emrdm {

// Portable float container used for checkpoints, dataset images and
// restored outputs. Layout (all little-endian):
//
//   magic  "EMRD"
//   u32    version (= 1)
//   u32    header byte count, then the header text (key = value lines)
//   u32    tensor count
//   per tensor:
//     u32  name length, name bytes
//     u8   dtype code (0 = f32)
//     u8   rank (= 4)
//     u32  dims[rank]  (L, C, H, W)
//     f32  payload, dims product values
//
// save(load(f)) is byte-identical.
struct TensorFile {
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<std::pair<std::string, Tensor>> tensors;

    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    std::string header_value(const std::string& key) const;
    bool header_has(const std::string& key) const;
};

inline constexpr uint32_t kTensorFileVersion = 1;

void write_tensor_file(const std::string& path, const TensorFile& tf);
TensorFile read_tensor_file(const std::string& path);

// Round any double to the nearest f32-representable value. Parameters and
// optimizer state are kept snapped so the f32 container is lossless.
inline double f32_snap(double x) { return static_cast<double>(static_cast<float>(x)); }
void f32_snap_tensor(Tensor& t);

}  // namespace emrdm

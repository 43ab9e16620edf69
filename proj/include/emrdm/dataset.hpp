#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrdm/tensor.hpp"

namespace emrdm {

struct DatasetSpec {
    int n_images = 64;  // training images
    int n_test = 16;
    int height = 32;
    int width = 32;
    int seq_len = 1;             // L cloudy observations per target
    double cloud_density = 0.5;  // expected cloud fraction in [0,1]
    double cloud_value = 0.95;
    uint64_t seed = 7;
    int channels = 3;
    int aux_channels = 1;  // synthetic cloud-penetrating modality, 0 disables

    void validate() const;
};

// Item pixel values live in [0,1]; the pipeline maps to model space
// ([-1,1]) before training/sampling.
struct DataItem {
    Tensor clean;  // (1, C, H, W)
    Tensor mu;     // (L, C, H, W)
    Tensor aux;    // (L, A, H, W); empty when aux_channels = 0
};

// Scalar statistics of the training split measured in model space;
// they parameterize the preconditioning.
struct DatasetStats {
    double sigma_data = 1.0;
    double sigma_mu = 1.0;
    double sigma_cov = 0.0;
};

struct Dataset {
    DatasetSpec spec;
    DatasetStats stats;
    std::vector<DataItem> train;
    std::vector<DataItem> test;
};

Dataset generate_dataset(const DatasetSpec& spec);

// Directory layout: manifest.cfg + train/NNNN.emt + test/NNNN.emt +
// previews/*.png.
void write_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// [0,1] <-> model-space mapping used across the pipeline.
Tensor to_model_space(const Tensor& unit);
Tensor to_unit_range(const Tensor& model);

// Conditioning tensor for one item: per-slice channel concat of the
// cloudy observation and the aux modality, in model space. When
// zero_cond is set the result is all zeros (noise-only baseline).
Tensor make_condition(const DataItem& item, bool zero_cond = false);
int condition_channels(const DatasetSpec& spec);

}  // namespace emrdm

#pragma once

#include <string>
#include <vector>

#include "emrdm/config.hpp"
#include "emrdm/dataset.hpp"
#include "emrdm/metrics.hpp"
#include "emrdm/nets.hpp"
#include "emrdm/sampler.hpp"
#include "emrdm/trainer.hpp"

namespace emrdm {

// Config -> typed settings. The trainer builder resolves the
// preconditioning statistics (manifest-measured by default).
DatasetSpec dataset_spec_from(const Config& cfg);
Schedule schedule_from(const Config& cfg);
SamplerConfig sampler_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg, const Dataset& ds);
NetConfig net_config_from(const Config& cfg, const DatasetSpec& spec);

struct EvalSummary {
    MetricReport mean;
    std::vector<MetricReport> per_image;
    std::vector<double> baseline_psnr;  // cloudy first-slice vs clean
    double mean_baseline_psnr = 0.0;
};

// Command bodies shared by the CLI and the acceptance suite.
void cmd_gen_data(const Config& cfg);
FitResult cmd_train(const Config& cfg, bool resume);
void cmd_sample(const Config& cfg);
EvalSummary cmd_evaluate(const Config& cfg);
void cmd_report(const Config& cfg);

}  // namespace emrdm

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emrdm/dataset.hpp"
#include "emrdm/nets.hpp"
#include "emrdm/precondition.hpp"
#include "emrdm/sampler.hpp"
#include "emrdm/schedule.hpp"

namespace emrdm {

struct TrainConfig {
    double p_mean = -1.2;  // ln sigma ~ N(p_mean, p_std^2)
    double p_std = 1.2;
    int batch_size = 8;
    int epochs = 40;
    double learning_rate = 1e-4;
    double clip_norm = 1.0;
    uint64_t seed = 0;
    int val_images = 8;
    PreconditionParams precond;
    Schedule sched = Schedule::mean_reverting(3.0);

    void validate() const;
};

// One training example in model space.
struct TrainItem {
    Tensor clean;  // (1,C,H,W)
    Tensor mu;     // (L,C,H,W)
    Tensor cond;   // (L,C+A,H,W)
};

std::vector<TrainItem> make_train_items(const std::vector<DataItem>& items, bool zero_cond);

// Draw of the per-example noise level: sigma = exp(p_mean + p_std * z).
double draw_sigma(const TrainConfig& cfg, Rng& rng);

// Weighted denoising loss lambda(sigma)*mean((D - x0)^2) for any denoiser;
// used by the oracle-floor tests and shared with train_step's math.
double weighted_loss(const Denoiser& denoiser, const TrainItem& item,
                     const TrainConfig& cfg, double t, Rng& noise_rng);

// One optimizer step over a mini-batch. step_index feeds the per-step
// noise streams so a resumed run reproduces the uninterrupted trajectory.
// Returns the batch loss.
double train_step(RawNetwork& net, const std::vector<const TrainItem*>& batch,
                  const TrainConfig& cfg, uint64_t step_index, uint64_t opt_step);

struct FitState {
    uint64_t global_step = 0;
    int epoch = 0;          // next epoch to run
    double best_val = -1e300;
};

struct EpochRecord {
    int epoch;
    double train_loss;
    double val_psnr;
};

struct FitResult {
    std::vector<EpochRecord> records;
    int best_epoch = -1;
    double best_val_psnr = 0.0;
};

// Epoch loop with shuffled mini-batches, per-epoch validation PSNR via a
// deterministic sampler, best/last checkpointing and a line-oriented
// metrics log. Resumes from <out_dir>/last.ckpt when resume = true.
FitResult fit(RawNetwork& net, const Dataset& ds, const TrainConfig& cfg,
              const SamplerConfig& sampler_cfg, const std::string& net_kind,
              const NetConfig& net_cfg, const std::string& out_dir, bool zero_cond,
              bool resume);

// Optimizer internals exposed for the resume/determinism tests.
void apply_optimizer_step(std::vector<Param*> params, const TrainConfig& cfg,
                          uint64_t opt_step);

}  // namespace emrdm

#pragma once

#include <memory>
#include <string>

#include "emrdm/nets.hpp"
#include "emrdm/precondition.hpp"
#include "emrdm/schedule.hpp"

namespace emrdm {

// Everything besides the weights that sampling or resuming needs:
// schedule, preconditioning statistics, network topology and the
// training cursor.
struct CheckpointMeta {
    Schedule sched = Schedule::mean_reverting(3.0);
    PreconditionParams precond;
    std::string net_kind = "multi";
    NetConfig net_cfg;
    bool zero_cond = false;
    uint64_t seed = 0;
    uint64_t global_step = 0;
    int epoch = 0;
    double best_val = -1e300;
};

void save_checkpoint(const std::string& path, RawNetwork& net, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::string& path);

// Rebuilds the network from the stored topology and loads parameters and
// optimizer state.
std::unique_ptr<RawNetwork> load_checkpoint(const std::string& path, CheckpointMeta& meta);

}  // namespace emrdm

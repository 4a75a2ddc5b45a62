#ifndef USMT_TRAINER_CHECKPOINT_HPP
#define USMT_TRAINER_CHECKPOINT_HPP

#include <memory>
#include <string>

#include "usmt/trainer/model.hpp"
#include "usmt/trainer/plan.hpp"

namespace usmt {

// Checkpoint directory layout: weights.bin (named float32 parameter map),
// meta.json (config hash, registry snapshot, best score, epoch, seed) and the
// trainer's log.csv.
struct CheckpointMeta {
    std::string paradigm;
    std::string unit_id;
    bool moe_enabled = false;
    uint64_t seed = 0;
    std::string config_hash;
    double best_score = 0;
    int best_epoch = -1;
    std::map<std::string, double> mre_baselines;  // per regression task
    ModelConfig model;
    OptimizerConfig optim;
    std::vector<TaskSpec> tasks;
    std::string data_base_dir;
};

void save_checkpoint(const std::string& dir, MultiTaskModel& model,
                     const CheckpointMeta& meta);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::unique_ptr<MultiTaskModel> model;
};

LoadedCheckpoint load_checkpoint(const std::string& dir);

}  // namespace usmt

#endif

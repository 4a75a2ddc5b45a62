#ifndef USMT_TRAINER_TRAINER_HPP
#define USMT_TRAINER_TRAINER_HPP

#include <string>

#include "usmt/trainer/checkpoint.hpp"

namespace usmt {

// Per-task datasets of one training unit with their train/validation split.
struct UnitData {
    std::map<std::string, TaskDataset> datasets;
    std::map<std::string, std::vector<int>> train_idx;
    std::map<std::string, std::vector<int>> val_idx;
};

UnitData load_unit_data(const TrainingUnit& unit, const TaskRegistry& registry,
                        int target_size, double val_fraction, uint64_t seed);

struct ValidationResult {
    metrics::MetricReport report;  // one primary-metric entry per task
    double selection_score = 0;
    std::map<std::string, double> mre_values;  // per regression task
};

// Primary metrics: seg DSC, cls AUC (accuracy fallback, flagged), reg MRE,
// det IoU. The selection score is the mean of direction-normalized values;
// MRE is divided by its epoch-0 baseline and negated.
ValidationResult validate_unit(const MultiTaskModel& model, const UnitData& data,
                               const std::map<std::string, double>& mre_baselines);

// Full metric sweep (seg DSC+HD, cls AUC/F1/MCC, reg MRE, det IoU) on a
// chosen split: "train", "val" or "test".
metrics::MetricReport evaluate_model(const MultiTaskModel& model, const UnitData& data,
                                     const std::string& split);

struct TrainUnitResult {
    std::string checkpoint_dir;
    double best_score = 0;
    int best_epoch = -1;
};

TrainUnitResult train_unit(const TrainingUnit& unit, const TaskRegistry& registry,
                           const ModelConfig& model_cfg, const OptimizerConfig& optim_cfg,
                           const LossWeights& weights, Paradigm paradigm, uint64_t seed,
                           const std::string& out_dir, bool verbose = false);

}  // namespace usmt

#endif

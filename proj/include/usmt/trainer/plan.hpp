#ifndef USMT_TRAINER_PLAN_HPP
#define USMT_TRAINER_PLAN_HPP

#include <map>
#include <string>
#include <vector>

#include "usmt/data/manifest.hpp"

namespace usmt {

enum class Paradigm { ts, cg, au };

Paradigm parse_paradigm(const std::string& s);
const char* paradigm_name(Paradigm p);

// One model instance and the tasks it trains on.
struct TrainingUnit {
    std::string unit_id;  // task id (TS), group name (CG) or "all" (AU)
    std::vector<std::string> task_ids;
    bool moe_enabled = false;
};

struct ParadigmPlan {
    Paradigm paradigm = Paradigm::ts;
    std::vector<TrainingUnit> units;
};

// TS: one unit per participating task, MoE off. CG: one unit per clinical
// group, MoE on. AU: a single unit over every participating task, MoE on.
// Unit and task ordering is lexicographic.
ParadigmPlan build_plan(Paradigm paradigm, const TaskRegistry& registry);

// Batches are single-task; the task is drawn per batch with probability
// proportional to its training-set size, deterministically in (seed, epoch).
struct Batch {
    std::string task_id;
    std::vector<int> sample_indices;
};

std::vector<Batch> sample_batches(const std::map<std::string, int>& task_train_sizes,
                                  int batch_size, int epoch, uint64_t seed);

}  // namespace usmt

#endif

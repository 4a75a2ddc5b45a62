#ifndef USMT_DATA_SYNTH_HPP
#define USMT_DATA_SYNTH_HPP

#include <string>
#include <vector>

#include "usmt/data/manifest.hpp"

namespace usmt {

// Plan for one synthetic task: shape "anatomies" rendered on speckle noise,
// with labels exact by construction.
struct SynthTaskPlan {
    std::string task_id;
    TaskType type = TaskType::seg;
    std::string group;
    int train_count = 0;
    int test_count = 0;
    int num_classes = 2;
    std::array<int, 2> original_resolution{224, 224};
    std::set<std::string> paradigms{"ts", "cg", "au"};
};

struct SynthPlan {
    std::vector<SynthTaskPlan> tasks;
};

SynthPlan parse_synth_plan(const std::string& json_text);
SynthPlan load_synth_plan(const std::string& path);

// Renders every task dataset under out_dir (images/, masks/) and returns the
// registry that was also written to out_dir/manifest.json. Deterministic per
// (plan, seed) regardless of task order.
TaskRegistry synth_generate(const SynthPlan& plan, uint64_t seed, const std::string& out_dir,
                            bool force = false);

}  // namespace usmt

#endif

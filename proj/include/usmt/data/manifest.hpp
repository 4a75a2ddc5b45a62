#ifndef USMT_DATA_MANIFEST_HPP
#define USMT_DATA_MANIFEST_HPP

#include <array>
#include <set>
#include <string>
#include <vector>

#include "usmt/heads/boxes.hpp"

namespace usmt {

enum class TaskType { seg, cls, reg, det };

TaskType parse_task_type(const std::string& s);
const char* task_type_name(TaskType t);

// One labeled record as stored in the manifest. Exactly one label field is
// set, matching the owning task's type.
struct SampleRecord {
    std::string image;
    std::string mask;                                 // seg
    int class_id = -1;                                // cls
    double value = 0;                                 // reg, original-resolution pixels
    bool has_value = false;
    BoundingBox box;                                  // det, normalized
    bool has_box = false;
    std::array<int, 2> original_resolution{0, 0};     // optional per-sample override
};

struct TaskSpec {
    std::string task_id;
    TaskType type = TaskType::seg;
    std::string group;
    int num_classes = 2;
    std::array<int, 2> original_resolution{224, 224};  // (H, W)
    double lambda = 1.0;
    std::set<std::string> paradigms{"ts", "cg", "au"};  // participation flags
    std::vector<SampleRecord> train;
    std::vector<SampleRecord> test;

    bool in_paradigm(const std::string& p) const { return paradigms.count(p) > 0; }
};

struct TaskRegistry {
    std::vector<TaskSpec> tasks;
    std::string base_dir;  // directory of the manifest; sample paths are relative to it

    const TaskSpec* find(const std::string& task_id) const {
        for (const auto& t : tasks)
            if (t.task_id == task_id) return &t;
        return nullptr;
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& t : tasks) out.push_back(t.task_id);
        return out;
    }
};

// Parses and validates a manifest; errors carry the offending field path.
TaskRegistry load_manifest(const std::string& path);
TaskRegistry parse_manifest(const std::string& json_text, const std::string& base_dir);
std::string manifest_to_json(const TaskRegistry& reg);
void save_manifest(const TaskRegistry& reg, const std::string& path);

}  // namespace usmt

#endif

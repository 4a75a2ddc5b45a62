#ifndef USMT_ANALYSIS_ANALYSIS_HPP
#define USMT_ANALYSIS_ANALYSIS_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "usmt/data/manifest.hpp"
#include "usmt/metrics/metrics.hpp"

namespace usmt {
namespace analysis {

enum class DeltaMode { percent, absolute };

DeltaMode parse_delta_mode(const std::string& s);
const char* delta_mode_name(DeltaMode m);

// Sign-adjusted change: positive always means improvement.
struct Delta {
    double absolute = 0;
    std::optional<double> percent;  // unset when ts_value == 0
};

Delta relative_delta(double ts_value, double other_value, metrics::Direction direction);

// Throws when ts_value == 0 (percent is undefined there).
double relative_delta_percent(double ts_value, double other_value,
                              metrics::Direction direction);

struct DeltaEntry {
    std::string task_id;
    std::string group;
    std::string metric;
    metrics::Direction direction = metrics::Direction::higher_better;
    double ts_value = 0;
    double other_value = 0;
    double delta_absolute = 0;
    std::optional<double> delta_percent;
};

struct GroupDelta {
    std::string group;
    int n_tasks = 0;
    double mean_absolute = 0;
    std::optional<double> mean_percent;  // unset if any member lacks a percent
    bool mixed_metrics = false;          // averaged across different metric names
};

struct DeltaReport {
    std::string baseline_paradigm;  // normally "ts"
    std::string other_paradigm;
    DeltaMode mode = DeltaMode::absolute;
    std::vector<DeltaEntry> per_task;
    std::vector<GroupDelta> per_group;

    std::string to_json() const;
    static DeltaReport from_json(const std::string& text);
    void save(const std::string& path) const;
    static DeltaReport load(const std::string& path);
};

// Primary metric name for a task type (the value compared across paradigms).
std::string primary_metric(TaskType type);

// Compares the primary metric of every shared task; both reports must cover
// the same task ids, and every task must map to a group. All numbers are
// rounded to 6 significant digits once, here.
DeltaReport make_delta_report(const metrics::MetricReport& ts_report,
                              const metrics::MetricReport& other_report,
                              const std::map<std::string, std::string>& task_groups,
                              const std::map<std::string, TaskType>& task_types,
                              DeltaMode mode);

std::vector<GroupDelta> group_average(const std::vector<DeltaEntry>& entries,
                                      DeltaMode mode);

// %.6g formatting used for every serialized float in this module.
double round6(double v);
std::string fmt6(double v);

}  // namespace analysis
}  // namespace usmt

#endif

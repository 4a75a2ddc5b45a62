#ifndef USMT_ANALYSIS_RENDER_HPP
#define USMT_ANALYSIS_RENDER_HPP

#include "usmt/analysis/analysis.hpp"

namespace usmt {
namespace analysis {

// Tabular renders; every float is %.6g and identical to the report fields.
void render_delta_csv(const DeltaReport& report, const std::string& path);
std::vector<DeltaEntry> parse_delta_csv(const std::string& path);
void render_delta_md(const DeltaReport& report, const std::string& path);

void render_metric_csv(const metrics::MetricReport& report, const std::string& path);

// Heatmap layout: one row per task, one column per compared paradigm, cell
// value is the sign-adjusted percent change.
struct HeatmapSpec {
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<std::optional<double>>> values;  // [row][col]
};

HeatmapSpec build_heatmap(const std::vector<const DeltaReport*>& reports);
void render_heatmap_png(const HeatmapSpec& spec, const std::string& path);

// Grouped bars of absolute primary-metric values per task and paradigm.
struct BarChartSpec {
    std::vector<std::string> series;   // paradigm names, baseline first
    std::vector<std::string> tasks;
    std::vector<std::string> metrics;  // per task
    std::vector<std::vector<double>> values;  // [task][series]
};

BarChartSpec build_barchart(const metrics::MetricReport& baseline,
                            const std::vector<const metrics::MetricReport*>& others,
                            const std::map<std::string, TaskType>& task_types);
void render_barchart_png(const BarChartSpec& spec, const std::string& path);

// Group-wise summary table (Group | #Images | one delta column per paradigm)
// in the report's delta mode.
void render_group_summary_md(const std::vector<const DeltaReport*>& reports,
                             const metrics::MetricReport& baseline,
                             const std::string& path);

}  // namespace analysis
}  // namespace usmt

#endif

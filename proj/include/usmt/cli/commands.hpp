#ifndef USMT_CLI_COMMANDS_HPP
#define USMT_CLI_COMMANDS_HPP

#include <optional>
#include <string>

#include "usmt/analysis/analysis.hpp"
#include "usmt/trainer/trainer.hpp"

namespace usmt {
namespace cli {

// Batch-run configuration; everything that affects results lives here or in
// the --seed flag so runs are auditable from one file.
struct RunConfig {
    std::string manifest;
    Paradigm paradigm = Paradigm::ts;
    uint64_t seed = 0;
    std::string out;
    bool deterministic = true;
    int jobs = 1;  // parallel TS units
    ModelConfig model;
    OptimizerConfig optimizer;
    LossWeights weights;

    void validate() const;
};

RunConfig run_config_from_json(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

struct SynthArgs {
    std::string plan_path;
    uint64_t seed = 0;
    std::string out;
    bool force = false;
};

// Returns the manifest path.
std::string cmd_synth(const SynthArgs& args);

struct TrainResultSummary {
    std::vector<TrainUnitResult> units;
};

TrainResultSummary cmd_train(const RunConfig& cfg, bool verbose = true);

struct EvaluateArgs {
    std::string checkpoint_dir;
    std::optional<std::string> manifest;  // overrides the snapshot's data location
    std::string split = "test";
    std::string out_path;
};

metrics::MetricReport cmd_evaluate(const EvaluateArgs& args);

struct AnalyzeArgs {
    std::string ts_report;
    std::string other_report;
    std::string manifest;  // provides task groups and types
    analysis::DeltaMode mode = analysis::DeltaMode::absolute;
    std::string out_dir;
};

analysis::DeltaReport cmd_analyze(const AnalyzeArgs& args);

struct ReportArgs {
    std::string ts_report;
    std::optional<std::string> cg_report;
    std::optional<std::string> au_report;
    std::string manifest;
    analysis::DeltaMode mode = analysis::DeltaMode::absolute;
    std::string out_dir;
};

void cmd_report(const ReportArgs& args);

}  // namespace cli
}  // namespace usmt

#endif

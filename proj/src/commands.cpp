#include "usmt/cli/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "usmt/analysis/render.hpp"
#include "usmt/data/synth.hpp"

namespace usmt {
namespace cli {

using nlohmann::json;
namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (manifest.empty()) throw ValidationError("run config: 'manifest' is required");
    if (out.empty()) throw ValidationError("run config: 'out' is required");
    if (jobs < 1) throw ValidationError("run config: jobs must be >= 1");
    model.validate();
    optimizer.validate();
}

RunConfig run_config_from_json(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("run config: malformed JSON");
    RunConfig cfg;
    try {
        cfg.manifest = j.value("manifest", std::string{});
        if (j.contains("paradigm"))
            cfg.paradigm = parse_paradigm(j.at("paradigm").get<std::string>());
        cfg.seed = j.value("seed", 0ull);
        cfg.out = j.value("out", std::string{});
        cfg.deterministic = j.value("deterministic", true);
        cfg.jobs = j.value("jobs", 1);
        if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
        if (j.contains("optimizer"))
            cfg.optimizer = optimizer_config_from_json(j.at("optimizer"));
        if (j.contains("lambda"))
            cfg.weights.lambda = j.at("lambda").get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("run config: ") + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("run config: cannot open " + path);
    return run_config_from_json(std::string((std::istreambuf_iterator<char>(f)),
                                            std::istreambuf_iterator<char>()));
}

std::string cmd_synth(const SynthArgs& args) {
    auto plan = load_synth_plan(args.plan_path);
    auto reg = synth_generate(plan, args.seed, args.out, args.force);
    return (fs::path(args.out) / "manifest.json").string();
}

TrainResultSummary cmd_train(const RunConfig& cfg, bool verbose) {
    cfg.validate();
    auto registry = load_manifest(cfg.manifest);
    auto plan = build_plan(cfg.paradigm, registry);
    fs::path out(cfg.out);
    fs::create_directories(out);
    {
        json echo;
        echo["manifest"] = cfg.manifest;
        echo["paradigm"] = paradigm_name(cfg.paradigm);
        echo["seed"] = cfg.seed;
        echo["deterministic"] = cfg.deterministic;
        echo["jobs"] = cfg.jobs;
        echo["model"] = model_config_to_json(cfg.model);
        echo["optimizer"] = optimizer_config_to_json(cfg.optimizer);
        std::ofstream f(out / "run.json");
        f << echo.dump(2) << "\n";
    }

    TrainResultSummary summary;
    summary.units.resize(plan.units.size());
    std::mutex print_mutex;
    auto run_unit = [&](size_t i) {
        const auto& unit = plan.units[i];
        std::string unit_dir = (out / unit.unit_id).string();
        auto result = train_unit(unit, registry, cfg.model, cfg.optimizer, cfg.weights,
                                 plan.paradigm, cfg.seed, unit_dir,
                                 verbose && cfg.jobs == 1);
        {
            std::lock_guard<std::mutex> lock(print_mutex);
            summary.units[i] = result;
            if (verbose)
                std::cout << "trained unit '" << unit.unit_id << "' -> " << unit_dir
                          << " (best epoch " << result.best_epoch << ", score "
                          << result.best_score << ")\n";
        }
    };
    if (cfg.jobs <= 1 || plan.units.size() <= 1) {
        for (size_t i = 0; i < plan.units.size(); ++i) run_unit(i);
    } else {
        // units share no mutable state; run them in waves of `jobs` threads
        size_t next = 0;
        while (next < plan.units.size()) {
            std::vector<std::thread> pool;
            for (int j = 0; j < cfg.jobs && next < plan.units.size(); ++j, ++next)
                pool.emplace_back(run_unit, next);
            for (auto& t : pool) t.join();
        }
    }
    return summary;
}

metrics::MetricReport cmd_evaluate(const EvaluateArgs& args) {
    auto loaded = load_checkpoint(args.checkpoint_dir);
    TaskRegistry registry;
    registry.tasks = loaded.meta.tasks;
    registry.base_dir = loaded.meta.data_base_dir;
    if (args.manifest) {
        auto external = load_manifest(*args.manifest);
        for (const auto& t : loaded.meta.tasks)
            if (!external.find(t.task_id))
                throw ValidationError("manifest lacks checkpoint task '" + t.task_id + "'");
        registry = std::move(external);
    }
    TrainingUnit unit;
    unit.unit_id = loaded.meta.unit_id;
    unit.moe_enabled = loaded.meta.moe_enabled;
    for (const auto& t : loaded.meta.tasks) unit.task_ids.push_back(t.task_id);

    auto data = load_unit_data(unit, registry, loaded.meta.model.encoder.image_size,
                               loaded.meta.optim.val_fraction, loaded.meta.seed);
    auto report = evaluate_model(*loaded.model, data, args.split);
    report.paradigm = loaded.meta.paradigm;
    report.seed = loaded.meta.seed;
    report.checkpoint = args.checkpoint_dir;
    if (!args.out_path.empty()) report.save(args.out_path);
    return report;
}

namespace {

void grouping_from_manifest(const std::string& manifest_path,
                            std::map<std::string, std::string>& groups,
                            std::map<std::string, TaskType>& types) {
    auto reg = load_manifest(manifest_path);
    for (const auto& t : reg.tasks) {
        groups[t.task_id] = t.group;
        types[t.task_id] = t.type;
    }
}

}  // namespace

analysis::DeltaReport cmd_analyze(const AnalyzeArgs& args) {
    auto ts = metrics::MetricReport::load(args.ts_report);
    auto other = metrics::MetricReport::load(args.other_report);
    std::map<std::string, std::string> groups;
    std::map<std::string, TaskType> types;
    grouping_from_manifest(args.manifest, groups, types);
    auto report = analysis::make_delta_report(ts, other, groups, types, args.mode);
    fs::create_directories(args.out_dir);
    fs::path out(args.out_dir);
    report.save((out / "delta.json").string());
    analysis::render_delta_csv(report, (out / "delta.csv").string());
    analysis::render_delta_md(report, (out / "delta.md").string());
    analysis::render_heatmap_png(analysis::build_heatmap({&report}),
                                 (out / "heatmap.png").string());
    return report;
}

void cmd_report(const ReportArgs& args) {
    auto ts = metrics::MetricReport::load(args.ts_report);
    std::map<std::string, std::string> groups;
    std::map<std::string, TaskType> types;
    grouping_from_manifest(args.manifest, groups, types);

    std::vector<metrics::MetricReport> others;
    if (args.cg_report) others.push_back(metrics::MetricReport::load(*args.cg_report));
    if (args.au_report) others.push_back(metrics::MetricReport::load(*args.au_report));
    if (others.empty())
        throw ValidationError("report: need at least one of --cg / --au to compare");

    fs::create_directories(args.out_dir);
    fs::path out(args.out_dir);
    std::vector<analysis::DeltaReport> deltas;
    for (const auto& other : others)
        deltas.push_back(analysis::make_delta_report(ts, other, groups, types, args.mode));
    std::vector<const analysis::DeltaReport*> delta_ptrs;
    std::vector<const metrics::MetricReport*> other_ptrs;
    for (size_t i = 0; i < deltas.size(); ++i) {
        deltas[i].save((out / ("delta_" + deltas[i].other_paradigm + ".json")).string());
        delta_ptrs.push_back(&deltas[i]);
        other_ptrs.push_back(&others[i]);
    }
    analysis::render_group_summary_md(delta_ptrs, ts, (out / "summary.md").string());
    analysis::render_heatmap_png(analysis::build_heatmap(delta_ptrs),
                                 (out / "heatmap.png").string());
    analysis::render_barchart_png(analysis::build_barchart(ts, other_ptrs, types),
                                  (out / "barchart.png").string());
}

}  // namespace cli
}  // namespace usmt

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>

#include "usmt/cli/commands.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

int guarded(const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const usmt::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const usmt::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const usmt::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-organ multi-task ultrasound training framework"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset from a plan");
    usmt::cli::SynthArgs synth_args;
    synth->add_option("--plan", synth_args.plan_path, "synthetic plan JSON")->required();
    synth->add_option("--seed", synth_args.seed, "generator seed")->default_val(0);
    synth->add_option("--out", synth_args.out, "output directory")->required();
    synth->add_flag("--force", synth_args.force, "overwrite a non-empty output directory");

    // train
    auto* train = app.add_subcommand("train", "train one paradigm from a run config");
    std::string train_config;
    std::string train_paradigm, train_out;
    bool train_deterministic = false, force_train = false, seed_set = false;
    uint64_t train_seed = 0;
    train->add_option("--config", train_config, "run config JSON")->required();
    train->add_option("--paradigm", train_paradigm, "override: ts|cg|au");
    train->add_option_function<uint64_t>(
        "--seed",
        [&](uint64_t s) {
            train_seed = s;
            seed_set = true;
        },
        "override seed");
    train->add_option("--out", train_out, "override output directory");
    train->add_flag("--force", force_train, "allow writing into an existing run directory");
    train->add_flag("--deterministic", train_deterministic,
                    "force single-job deterministic execution");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "compute metrics for a checkpoint");
    usmt::cli::EvaluateArgs eval_args;
    std::string eval_manifest;
    evaluate->add_option("--checkpoint", eval_args.checkpoint_dir, "checkpoint directory")
        ->required();
    evaluate->add_option("--manifest", eval_manifest, "manifest overriding data locations");
    evaluate->add_option("--split", eval_args.split, "train|val|test")->default_val("test");
    evaluate->add_option("--out", eval_args.out_path, "metric report JSON path")->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "compare a paradigm report against TS");
    usmt::cli::AnalyzeArgs analyze_args;
    std::string analyze_mode = "absolute";
    analyze->add_option("--ts", analyze_args.ts_report, "TS metric report")->required();
    analyze->add_option("--other", analyze_args.other_report, "compared metric report")
        ->required();
    analyze->add_option("--manifest", analyze_args.manifest, "manifest with task groups")
        ->required();
    analyze->add_option("--mode", analyze_mode, "percent|absolute")->default_val("absolute");
    analyze->add_option("--out", analyze_args.out_dir, "output directory")->required();

    // report
    auto* report = app.add_subcommand("report", "group-wise summary across paradigms");
    usmt::cli::ReportArgs report_args;
    std::string report_cg, report_au, report_mode = "absolute";
    report->add_option("--ts", report_args.ts_report, "TS metric report")->required();
    report->add_option("--cg", report_cg, "CG metric report");
    report->add_option("--au", report_au, "AU metric report");
    report->add_option("--manifest", report_args.manifest, "manifest with task groups")
        ->required();
    report->add_option("--mode", report_mode, "percent|absolute")->default_val("absolute");
    report->add_option("--out", report_args.out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (synth->parsed())
        return guarded([&] {
            auto manifest = usmt::cli::cmd_synth(synth_args);
            std::cout << "wrote " << manifest << "\n";
        });

    if (train->parsed())
        return guarded([&] {
            auto cfg = usmt::cli::load_run_config(train_config);
            if (!train_paradigm.empty()) cfg.paradigm = usmt::parse_paradigm(train_paradigm);
            if (seed_set) cfg.seed = train_seed;
            if (!train_out.empty()) cfg.out = train_out;
            if (train_deterministic) {
                cfg.deterministic = true;
                cfg.jobs = 1;
            }
            cfg.validate();
            namespace fs = std::filesystem;
            if (fs::exists(cfg.out) && !fs::is_empty(cfg.out) && !force_train)
                throw usmt::ValidationError("output directory '" + cfg.out +
                                            "' is not empty; pass --force to reuse");
            usmt::cli::cmd_train(cfg);
        });

    if (evaluate->parsed())
        return guarded([&] {
            if (!eval_manifest.empty()) eval_args.manifest = eval_manifest;
            auto r = usmt::cli::cmd_evaluate(eval_args);
            std::cout << "wrote " << eval_args.out_path << " (" << r.entries.size()
                      << " metric entries)\n";
        });

    if (analyze->parsed())
        return guarded([&] {
            analyze_args.mode = usmt::analysis::parse_delta_mode(analyze_mode);
            usmt::cli::cmd_analyze(analyze_args);
            std::cout << "wrote delta report under " << analyze_args.out_dir << "\n";
        });

    if (report->parsed())
        return guarded([&] {
            if (!report_cg.empty()) report_args.cg_report = report_cg;
            if (!report_au.empty()) report_args.au_report = report_au;
            report_args.mode = usmt::analysis::parse_delta_mode(report_mode);
            usmt::cli::cmd_report(report_args);
            std::cout << "wrote summary under " << report_args.out_dir << "\n";
        });

    return kExitOk;
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "usmt/analysis/render.hpp"
#include "usmt/core/rng.hpp"
#include "usmt/data/png_io.hpp"

using usmt::Rng;
using usmt::TaskType;
namespace analysis = usmt::analysis;
namespace metrics = usmt::metrics;
using analysis::DeltaMode;
using metrics::Direction;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("usmt_analysis_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

metrics::MetricReport report_with(const std::string& paradigm,
                                  std::vector<std::tuple<std::string, std::string, double>>
                                      entries) {
    metrics::MetricReport r;
    r.paradigm = paradigm;
    for (auto& [task, metric, value] : entries) {
        metrics::MetricEntry e;
        e.task_id = task;
        e.metric = metric;
        e.value = value;
        e.direction = metrics::metric_direction(metric);
        e.n_samples = 10;
        r.entries.push_back(e);
    }
    return r;
}

}  // namespace

TEST_CASE("relative_delta: published arithmetic reproduces") {
    // DSC 0.713 -> 0.145 (higher better): -79.7% within 0.05
    auto d = analysis::relative_delta(0.713, 0.145, Direction::higher_better);
    REQUIRE(d.percent.has_value());
    CHECK(std::abs(*d.percent - (-79.7)) < 0.05);
    CHECK(d.absolute == doctest::Approx(-0.568));

    // MRE 30.4 -> 15.6 (lower better): +48.68% within 0.01
    auto m = analysis::relative_delta(30.4, 15.6, Direction::lower_better);
    REQUIRE(m.percent.has_value());
    CHECK(std::abs(*m.percent - 48.68) < 0.01);
    CHECK(m.absolute == doctest::Approx(14.8));
}

TEST_CASE("relative_delta: identity, zero baseline, sign convention") {
    auto same = analysis::relative_delta(0.42, 0.42, Direction::higher_better);
    CHECK(same.absolute == 0.0);
    CHECK(*same.percent == 0.0);

    auto zero = analysis::relative_delta(0.0, 0.3, Direction::higher_better);
    CHECK_FALSE(zero.percent.has_value());
    CHECK_THROWS_AS(analysis::relative_delta_percent(0.0, 0.3, Direction::higher_better),
                    usmt::ValidationError);

    // improvement is always positive, for both directions
    Rng rng(51);
    for (int t = 0; t < 200; ++t) {
        double ts = rng.uniform(0.05, 10.0);
        double better = ts * rng.uniform(1.01, 3.0);
        double worse = ts * rng.uniform(0.1, 0.99);
        auto hb_up = analysis::relative_delta(ts, better, Direction::higher_better);
        CHECK(hb_up.absolute > 0);
        CHECK(*hb_up.percent > 0);
        auto hb_down = analysis::relative_delta(ts, worse, Direction::higher_better);
        CHECK(hb_down.absolute < 0);
        auto lb_improve = analysis::relative_delta(ts, worse, Direction::lower_better);
        CHECK(lb_improve.absolute > 0);
        CHECK(*lb_improve.percent > 0);
        auto lb_worse = analysis::relative_delta(ts, better, Direction::lower_better);
        CHECK(lb_worse.absolute < 0);
        // modes share a sign when ts > 0
        CHECK(std::signbit(lb_worse.absolute) == std::signbit(*lb_worse.percent));
    }
}

TEST_CASE("group_average: singleton, symmetric mean, hand aggregate, errors") {
    std::vector<analysis::DeltaEntry> entries;
    auto add = [&](const std::string& task, const std::string& group, double dabs,
                   double dpct) {
        analysis::DeltaEntry e;
        e.task_id = task;
        e.group = group;
        e.metric = "DSC";
        e.delta_absolute = dabs;
        e.delta_percent = dpct;
        entries.push_back(e);
    };
    add("a", "G1", 0.5, 10.0);
    auto single = analysis::group_average(entries, DeltaMode::absolute);
    REQUIRE(single.size() == 1);
    CHECK(single[0].mean_absolute == doctest::Approx(0.5));
    CHECK(single[0].n_tasks == 1);

    add("b", "G2", 10.0, 10.0);
    add("c", "G2", -10.0, -10.0);
    add("d", "G2", 0.0, 0.0);
    auto groups = analysis::group_average(entries, DeltaMode::percent);
    REQUIRE(groups.size() == 2);
    CHECK(groups[1].group == "G2");
    CHECK(groups[1].mean_absolute == doctest::Approx(0.0));
    CHECK(*groups[1].mean_percent == doctest::Approx(0.0));

    // absolute-mode mean of (-0.568, +0.1, +0.2) -> -0.0893
    std::vector<analysis::DeltaEntry> breast;
    entries.clear();
    add("s", "Breast", -0.568, -79.7);
    add("t", "Breast", 0.1, 9.0);
    add("u", "Breast", 0.2, 18.0);
    auto agg = analysis::group_average(entries, DeltaMode::absolute);
    CHECK(agg[0].mean_absolute == doctest::Approx(-0.0893333).epsilon(1e-4));

    std::vector<analysis::DeltaEntry> none;
    CHECK_THROWS_AS(analysis::group_average(none, DeltaMode::absolute),
                    usmt::ValidationError);
    entries[0].group = "";
    CHECK_THROWS_AS(analysis::group_average(entries, DeltaMode::absolute),
                    usmt::ValidationError);
}

TEST_CASE("group_average: permutation invariant and equals the hand mean") {
    Rng rng(52);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<analysis::DeltaEntry> entries;
        int n = 2 + static_cast<int>(rng.uniform_int(0, 8));
        double acc = 0;
        for (int i = 0; i < n; ++i) {
            analysis::DeltaEntry e;
            e.task_id = "t" + std::to_string(i);
            e.group = "G";
            e.metric = "DSC";
            e.delta_absolute = rng.normal(0, 2);
            e.delta_percent = rng.normal(0, 20);
            acc += e.delta_absolute;
            entries.push_back(e);
        }
        auto mean = analysis::group_average(entries, DeltaMode::absolute)[0].mean_absolute;
        CHECK(mean == doctest::Approx(analysis::round6(acc / n)).epsilon(1e-9));
        std::reverse(entries.begin(), entries.end());
        CHECK(analysis::group_average(entries, DeltaMode::absolute)[0].mean_absolute ==
              doctest::Approx(mean));
    }
}

TEST_CASE("make_delta_report: identity comparison yields all-zero deltas") {
    auto ts = report_with("ts", {{"a", "DSC", 0.8}, {"b", "MRE", 12.0}});
    std::map<std::string, std::string> groups{{"a", "G"}, {"b", "G"}};
    std::map<std::string, TaskType> types{{"a", TaskType::seg}, {"b", TaskType::reg}};
    auto r = analysis::make_delta_report(ts, ts, groups, types, DeltaMode::percent);
    for (const auto& e : r.per_task) {
        CHECK(e.delta_absolute == 0.0);
        CHECK(*e.delta_percent == 0.0);
    }
    REQUIRE(r.per_group.size() == 1);
    CHECK(r.per_group[0].mean_absolute == 0.0);
    CHECK(r.per_group[0].mixed_metrics);
}

TEST_CASE("make_delta_report: mismatched registries are refused with the ids") {
    auto ts = report_with("ts", {{"a", "DSC", 0.8}});
    auto other = report_with("cg", {{"b", "DSC", 0.7}});
    std::map<std::string, std::string> groups{{"a", "G"}, {"b", "G"}};
    std::map<std::string, TaskType> types{{"a", TaskType::seg}, {"b", TaskType::seg}};
    CHECK_THROWS_WITH_AS(
        analysis::make_delta_report(ts, other, groups, types, DeltaMode::absolute),
        doctest::Contains("-a"), usmt::ValidationError);
}

TEST_CASE("delta report: json round trip and csv render/parse round trip") {
    auto ts = report_with("ts", {{"a", "DSC", 0.713}, {"b", "MRE", 30.4}, {"c", "AUC", 0.8}});
    auto cg = report_with("cg", {{"a", "DSC", 0.145}, {"b", "MRE", 15.6}, {"c", "AUC", 0.9}});
    std::map<std::string, std::string> groups{{"a", "Breast"}, {"b", "OB"}, {"c", "OB"}};
    std::map<std::string, TaskType> types{
        {"a", TaskType::seg}, {"b", TaskType::reg}, {"c", TaskType::cls}};
    auto r = analysis::make_delta_report(ts, cg, groups, types, DeltaMode::percent);

    auto back = analysis::DeltaReport::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
    REQUIRE(back.per_task.size() == 3);
    CHECK(back.per_task[0].delta_percent.has_value());

    auto dir = temp_dir("csv");
    analysis::render_delta_csv(r, (dir / "delta.csv").string());
    auto parsed = analysis::parse_delta_csv((dir / "delta.csv").string());
    REQUIRE(parsed.size() == r.per_task.size());
    for (size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].task_id == r.per_task[i].task_id);
        CHECK(parsed[i].ts_value == r.per_task[i].ts_value);          // exact: %.6g both ways
        CHECK(parsed[i].other_value == r.per_task[i].other_value);
        CHECK(parsed[i].delta_absolute == r.per_task[i].delta_absolute);
        CHECK(*parsed[i].delta_percent == *r.per_task[i].delta_percent);
    }
}

TEST_CASE("heatmap layout: cell count equals tasks x paradigms") {
    auto ts = report_with("ts", {{"a", "DSC", 0.7}, {"b", "MRE", 20.0}});
    auto cg = report_with("cg", {{"a", "DSC", 0.6}, {"b", "MRE", 25.0}});
    auto au = report_with("au", {{"a", "DSC", 0.75}, {"b", "MRE", 18.0}});
    std::map<std::string, std::string> groups{{"a", "G"}, {"b", "G"}};
    std::map<std::string, TaskType> types{{"a", TaskType::seg}, {"b", TaskType::reg}};
    auto d_cg = analysis::make_delta_report(ts, cg, groups, types, DeltaMode::percent);
    auto d_au = analysis::make_delta_report(ts, au, groups, types, DeltaMode::percent);
    auto spec = analysis::build_heatmap({&d_cg, &d_au});
    CHECK(spec.row_labels.size() == 2);
    CHECK(spec.col_labels.size() == 2);
    int cells = 0;
    for (auto& row : spec.values) cells += static_cast<int>(row.size());
    CHECK(cells == 4);

    auto dir = temp_dir("png");
    analysis::render_heatmap_png(spec, (dir / "heatmap.png").string());
    auto img = usmt::read_png((dir / "heatmap.png").string());
    CHECK(img.width > 0);
    CHECK(img.channels == 3);

    // deterministic bytes
    analysis::render_heatmap_png(spec, (dir / "heatmap2.png").string());
    std::ifstream f1(dir / "heatmap.png", std::ios::binary), f2(dir / "heatmap2.png",
                                                                std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
}

TEST_CASE("bar chart and group summary render") {
    auto ts = report_with("ts", {{"a", "DSC", 0.7}, {"b", "MRE", 20.0}});
    auto au = report_with("au", {{"a", "DSC", 0.75}, {"b", "MRE", 18.0}});
    std::map<std::string, std::string> groups{{"a", "G"}, {"b", "H"}};
    std::map<std::string, TaskType> types{{"a", TaskType::seg}, {"b", TaskType::reg}};
    auto spec = analysis::build_barchart(ts, {&au}, types);
    CHECK(spec.series == std::vector<std::string>{"ts", "au"});
    CHECK(spec.tasks.size() == 2);
    CHECK(spec.values[0][0] == doctest::Approx(0.7));

    auto dir = temp_dir("bar");
    analysis::render_barchart_png(spec, (dir / "bars.png").string());
    CHECK(usmt::read_png((dir / "bars.png").string()).height > 0);

    auto d_au = analysis::make_delta_report(ts, au, groups, types, DeltaMode::absolute);
    analysis::render_group_summary_md({&d_au}, ts, (dir / "summary.md").string());
    std::ifstream f(dir / "summary.md");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text.find("| Group | #Images |") != std::string::npos);
    CHECK(text.find("Delta(au)") != std::string::npos);
    CHECK(text.find("mode: absolute") != std::string::npos);

    analysis::render_delta_md(d_au, (dir / "delta.md").string());
    std::ifstream fmd(dir / "delta.md");
    std::string md((std::istreambuf_iterator<char>(fmd)), std::istreambuf_iterator<char>());
    CHECK(md.find("| Task | Group | Metric |") != std::string::npos);
}

TEST_CASE("six significant digit formatting") {
    CHECK(analysis::fmt6(-79.66339) == "-79.6634");
    CHECK(analysis::fmt6(0.5) == "0.5");
    CHECK(analysis::round6(1.0 / 3.0) == doctest::Approx(0.333333).epsilon(1e-9));
    CHECK(analysis::parse_delta_mode("percent") == DeltaMode::percent);
    CHECK_THROWS_AS(analysis::parse_delta_mode("pct"), usmt::ValidationError);
}

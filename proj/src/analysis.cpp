#include "usmt/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "usmt/data/manifest.hpp"

namespace usmt {
namespace analysis {

using nlohmann::json;

DeltaMode parse_delta_mode(const std::string& s) {
    if (s == "percent") return DeltaMode::percent;
    if (s == "absolute") return DeltaMode::absolute;
    throw ValidationError("unknown delta mode '" + s + "' (expected percent|absolute)");
}

const char* delta_mode_name(DeltaMode m) {
    return m == DeltaMode::percent ? "percent" : "absolute";
}

double round6(double v) { return std::strtod(fmt6(v).c_str(), nullptr); }

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

Delta relative_delta(double ts_value, double other_value, metrics::Direction direction) {
    if (!std::isfinite(ts_value) || !std::isfinite(other_value))
        throw NumericError("relative_delta: non-finite input");
    Delta d;
    if (direction == metrics::Direction::higher_better)
        d.absolute = other_value - ts_value;
    else
        d.absolute = ts_value - other_value;
    if (ts_value != 0.0) d.percent = d.absolute / ts_value * 100.0;
    return d;
}

double relative_delta_percent(double ts_value, double other_value,
                              metrics::Direction direction) {
    auto d = relative_delta(ts_value, other_value, direction);
    if (!d.percent)
        throw ValidationError("relative_delta: percent undefined for ts_value = 0");
    return *d.percent;
}

std::string primary_metric(TaskType type) {
    switch (type) {
        case TaskType::seg: return "DSC";
        case TaskType::cls: return "AUC";
        case TaskType::reg: return "MRE";
        case TaskType::det: return "IoU";
    }
    return "?";
}

std::vector<GroupDelta> group_average(const std::vector<DeltaEntry>& entries,
                                      DeltaMode mode) {
    if (entries.empty()) throw ValidationError("group_average: no delta entries");
    std::map<std::string, std::vector<const DeltaEntry*>> by_group;
    for (const auto& e : entries) {
        if (e.group.empty())
            throw ValidationError("group_average: task '" + e.task_id + "' has no group");
        by_group[e.group].push_back(&e);
    }
    std::vector<GroupDelta> out;
    for (const auto& [group, members] : by_group) {
        GroupDelta g;
        g.group = group;
        g.n_tasks = static_cast<int>(members.size());
        double abs_acc = 0, pct_acc = 0;
        bool pct_ok = true;
        std::set<std::string> metric_names;
        for (const auto* e : members) {
            abs_acc += e->delta_absolute;
            if (e->delta_percent)
                pct_acc += *e->delta_percent;
            else
                pct_ok = false;
            metric_names.insert(e->metric);
        }
        g.mean_absolute = round6(abs_acc / g.n_tasks);
        if (pct_ok) g.mean_percent = round6(pct_acc / g.n_tasks);
        g.mixed_metrics = metric_names.size() > 1;
        if (mode == DeltaMode::percent && !pct_ok)
            throw ValidationError("group_average: group '" + group +
                                  "' has a zero TS value, percent mean undefined");
        out.push_back(std::move(g));
    }
    return out;
}

DeltaReport make_delta_report(const metrics::MetricReport& ts_report,
                              const metrics::MetricReport& other_report,
                              const std::map<std::string, std::string>& task_groups,
                              const std::map<std::string, TaskType>& task_types,
                              DeltaMode mode) {
    auto task_set = [](const metrics::MetricReport& r) {
        std::set<std::string> ids;
        for (const auto& e : r.entries) ids.insert(e.task_id);
        return ids;
    };
    auto ts_ids = task_set(ts_report);
    auto other_ids = task_set(other_report);
    if (ts_ids != other_ids) {
        std::string diff;
        for (const auto& id : ts_ids)
            if (!other_ids.count(id)) diff += " -" + id;
        for (const auto& id : other_ids)
            if (!ts_ids.count(id)) diff += " +" + id;
        throw ValidationError("delta: task registries differ between reports:" + diff);
    }

    // primary entry per task: the task-type metric, or its flagged fallback
    auto find_primary = [&](const metrics::MetricReport& r, const std::string& task,
                            TaskType type) -> const metrics::MetricEntry* {
        const auto* e = r.find(task, primary_metric(type));
        if (!e && type == TaskType::cls) e = r.find(task, "ACC");
        return e;
    };

    DeltaReport report;
    report.baseline_paradigm = ts_report.paradigm.empty() ? "ts" : ts_report.paradigm;
    report.other_paradigm = other_report.paradigm;
    report.mode = mode;
    for (const auto& id : ts_ids) {
        auto type_it = task_types.find(id);
        if (type_it == task_types.end())
            throw ValidationError("delta: task '" + id + "' has no type mapping");
        auto group_it = task_groups.find(id);
        if (group_it == task_groups.end() || group_it->second.empty())
            throw ValidationError("delta: task '" + id + "' has no group mapping");
        const auto* ts_e = find_primary(ts_report, id, type_it->second);
        const auto* other_e = find_primary(other_report, id, type_it->second);
        if (!ts_e || !other_e)
            throw ValidationError("delta: no primary metric entry for task '" + id + "'");
        if (ts_e->metric != other_e->metric)
            throw ValidationError("delta: task '" + id + "' compares " + ts_e->metric +
                                  " against " + other_e->metric);
        DeltaEntry entry;
        entry.task_id = id;
        entry.group = group_it->second;
        entry.metric = ts_e->metric;
        entry.direction = ts_e->direction;
        entry.ts_value = round6(ts_e->value);
        entry.other_value = round6(other_e->value);
        auto d = relative_delta(ts_e->value, other_e->value, ts_e->direction);
        entry.delta_absolute = round6(d.absolute);
        if (d.percent) entry.delta_percent = round6(*d.percent);
        if (mode == DeltaMode::percent && !d.percent)
            throw ValidationError("delta: percent undefined for task '" + id +
                                  "' (ts value is 0)");
        report.per_task.push_back(std::move(entry));
    }
    std::sort(report.per_task.begin(), report.per_task.end(),
              [](const DeltaEntry& a, const DeltaEntry& b) { return a.task_id < b.task_id; });
    report.per_group = group_average(report.per_task, mode);
    return report;
}

std::string DeltaReport::to_json() const {
    json j;
    j["baseline_paradigm"] = baseline_paradigm;
    j["other_paradigm"] = other_paradigm;
    j["mode"] = delta_mode_name(mode);
    j["per_task"] = json::array();
    for (const auto& e : per_task) {
        json t = {{"task_id", e.task_id},
                  {"group", e.group},
                  {"metric", e.metric},
                  {"direction", metrics::direction_name(e.direction)},
                  {"ts_value", round6(e.ts_value)},
                  {"other_value", round6(e.other_value)},
                  {"delta_absolute", round6(e.delta_absolute)}};
        if (e.delta_percent) t["delta_percent"] = round6(*e.delta_percent);
        j["per_task"].push_back(std::move(t));
    }
    j["per_group"] = json::array();
    for (const auto& g : per_group) {
        json t = {{"group", g.group},
                  {"n_tasks", g.n_tasks},
                  {"mean_absolute", round6(g.mean_absolute)},
                  {"mixed_metrics", g.mixed_metrics}};
        if (g.mean_percent) t["mean_percent"] = round6(*g.mean_percent);
        j["per_group"].push_back(std::move(t));
    }
    return j.dump(2);
}

DeltaReport DeltaReport::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("delta report: malformed JSON");
    DeltaReport r;
    try {
        r.baseline_paradigm = j.at("baseline_paradigm").get<std::string>();
        r.other_paradigm = j.at("other_paradigm").get<std::string>();
        r.mode = parse_delta_mode(j.at("mode").get<std::string>());
        for (const auto& t : j.at("per_task")) {
            DeltaEntry e;
            e.task_id = t.at("task_id").get<std::string>();
            e.group = t.at("group").get<std::string>();
            e.metric = t.at("metric").get<std::string>();
            e.direction = t.at("direction").get<std::string>() == "lower_better"
                              ? metrics::Direction::lower_better
                              : metrics::Direction::higher_better;
            e.ts_value = t.at("ts_value").get<double>();
            e.other_value = t.at("other_value").get<double>();
            e.delta_absolute = t.at("delta_absolute").get<double>();
            if (t.contains("delta_percent")) e.delta_percent = t.at("delta_percent").get<double>();
            r.per_task.push_back(std::move(e));
        }
        for (const auto& t : j.at("per_group")) {
            GroupDelta g;
            g.group = t.at("group").get<std::string>();
            g.n_tasks = t.at("n_tasks").get<int>();
            g.mean_absolute = t.at("mean_absolute").get<double>();
            if (t.contains("mean_percent")) g.mean_percent = t.at("mean_percent").get<double>();
            g.mixed_metrics = t.value("mixed_metrics", false);
            r.per_group.push_back(std::move(g));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("delta report: ") + e.what());
    }
    return r;
}

void DeltaReport::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << to_json() << "\n";
}

DeltaReport DeltaReport::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    return from_json(std::string((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>()));
}

}  // namespace analysis
}  // namespace usmt

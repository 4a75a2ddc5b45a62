#include "usmt/trainer/plan.hpp"

#include <algorithm>
#include <cmath>

#include "usmt/core/rng.hpp"

namespace usmt {

Paradigm parse_paradigm(const std::string& s) {
    if (s == "ts" || s == "TS") return Paradigm::ts;
    if (s == "cg" || s == "CG") return Paradigm::cg;
    if (s == "au" || s == "AU") return Paradigm::au;
    throw ValidationError("unknown paradigm '" + s + "' (expected ts|cg|au)");
}

const char* paradigm_name(Paradigm p) {
    switch (p) {
        case Paradigm::ts: return "ts";
        case Paradigm::cg: return "cg";
        case Paradigm::au: return "au";
    }
    return "?";
}

ParadigmPlan build_plan(Paradigm paradigm, const TaskRegistry& registry) {
    if (registry.tasks.empty()) throw ValidationError("build_plan: empty task registry");
    const std::string pname = paradigm_name(paradigm);
    std::vector<const TaskSpec*> participating;
    for (const auto& t : registry.tasks)
        if (t.in_paradigm(pname)) participating.push_back(&t);
    if (participating.empty())
        throw ValidationError("build_plan: no task participates in paradigm '" + pname + "'");
    std::sort(participating.begin(), participating.end(),
              [](const TaskSpec* a, const TaskSpec* b) { return a->task_id < b->task_id; });

    ParadigmPlan plan;
    plan.paradigm = paradigm;
    switch (paradigm) {
        case Paradigm::ts:
            for (const auto* t : participating)
                plan.units.push_back({t->task_id, {t->task_id}, false});
            break;
        case Paradigm::cg: {
            std::map<std::string, std::vector<std::string>> groups;
            for (const auto* t : participating) {
                if (t->group.empty())
                    throw ValidationError("build_plan: task '" + t->task_id +
                                          "' has no clinical group, required for CG");
                groups[t->group].push_back(t->task_id);
            }
            for (auto& [group, ids] : groups) plan.units.push_back({group, ids, true});
            break;
        }
        case Paradigm::au: {
            TrainingUnit unit;
            unit.unit_id = "all";
            unit.moe_enabled = true;
            for (const auto* t : participating) unit.task_ids.push_back(t->task_id);
            plan.units.push_back(std::move(unit));
            break;
        }
    }
    return plan;
}

std::vector<Batch> sample_batches(const std::map<std::string, int>& task_train_sizes,
                                  int batch_size, int epoch, uint64_t seed) {
    if (task_train_sizes.empty()) throw ValidationError("sample_batches: no tasks");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    int64_t total = 0;
    for (const auto& [task, n] : task_train_sizes) {
        if (n < 1)
            throw ValidationError("sample_batches: task '" + task + "' has an empty dataset");
        total += n;
    }
    auto epoch_tag = [&](const std::string& what) {
        return what + "/" + std::to_string(epoch);
    };
    // per-task shuffled index streams, cycled on exhaustion
    std::map<std::string, std::vector<int>> streams;
    std::map<std::string, size_t> cursor;
    for (const auto& [task, n] : task_train_sizes) {
        std::vector<int> idx(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        Rng perm_rng(mix_seed(seed, epoch_tag("perm/" + task)));
        perm_rng.shuffle(idx);
        streams[task] = std::move(idx);
        cursor[task] = 0;
    }

    Rng task_rng(mix_seed(seed, epoch_tag("task_draw")));
    int n_batches = static_cast<int>((total + batch_size - 1) / batch_size);
    std::vector<Batch> out;
    out.reserve(static_cast<size_t>(n_batches));
    for (int b = 0; b < n_batches; ++b) {
        double u = task_rng.uniform() * static_cast<double>(total);
        std::string chosen;
        double acc = 0;
        for (const auto& [task, n] : task_train_sizes) {
            acc += n;
            if (u < acc) {
                chosen = task;
                break;
            }
        }
        if (chosen.empty()) chosen = task_train_sizes.rbegin()->first;
        Batch batch;
        batch.task_id = chosen;
        auto& stream = streams[chosen];
        auto& cur = cursor[chosen];
        for (int i = 0; i < batch_size; ++i) {
            batch.sample_indices.push_back(stream[cur]);
            cur = (cur + 1) % stream.size();
        }
        out.push_back(std::move(batch));
    }
    return out;
}

}  // namespace usmt

#include "usmt/data/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "usmt/core/error.hpp"

namespace usmt {

using nlohmann::json;
namespace fs = std::filesystem;

TaskType parse_task_type(const std::string& s) {
    if (s == "seg") return TaskType::seg;
    if (s == "cls") return TaskType::cls;
    if (s == "reg") return TaskType::reg;
    if (s == "det") return TaskType::det;
    throw ValidationError("unknown task type '" + s + "' (expected seg|cls|reg|det)");
}

const char* task_type_name(TaskType t) {
    switch (t) {
        case TaskType::seg: return "seg";
        case TaskType::cls: return "cls";
        case TaskType::reg: return "reg";
        case TaskType::det: return "det";
    }
    return "?";
}

namespace {

SampleRecord parse_record(const json& j, TaskType type, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + ": sample record must be an object");
    SampleRecord r;
    if (!j.contains("image") || !j.at("image").is_string())
        throw ValidationError(where + ".image: missing or not a string");
    r.image = j.at("image").get<std::string>();
    if (!j.contains("label") || !j.at("label").is_object())
        throw ValidationError(where + ".label: missing or not an object");
    const json& lbl = j.at("label");
    switch (type) {
        case TaskType::seg:
            if (!lbl.contains("mask") || !lbl.at("mask").is_string())
                throw ValidationError(where + ".label.mask: segmentation needs a mask path");
            r.mask = lbl.at("mask").get<std::string>();
            break;
        case TaskType::cls:
            if (!lbl.contains("class") || !lbl.at("class").is_number_integer())
                throw ValidationError(where + ".label.class: classification needs an id");
            r.class_id = lbl.at("class").get<int>();
            if (r.class_id < 0) throw ValidationError(where + ".label.class: negative id");
            break;
        case TaskType::reg:
            if (!lbl.contains("value") || !lbl.at("value").is_number())
                throw ValidationError(where + ".label.value: regression needs a number");
            r.value = lbl.at("value").get<double>();
            r.has_value = true;
            break;
        case TaskType::det: {
            if (!lbl.contains("box") || !lbl.at("box").is_array() || lbl.at("box").size() != 4)
                throw ValidationError(where + ".label.box: detection needs [cx,cy,bw,bh]");
            auto b = lbl.at("box");
            r.box.cx = b[0].get<double>();
            r.box.cy = b[1].get<double>();
            r.box.bw = b[2].get<double>();
            r.box.bh = b[3].get<double>();
            if (r.box.bw <= 0 || r.box.bh <= 0)
                throw ValidationError(where + ".label.box: degenerate extents");
            r.has_box = true;
            break;
        }
    }
    if (j.contains("original_resolution")) {
        auto res = j.at("original_resolution");
        if (!res.is_array() || res.size() != 2)
            throw ValidationError(where + ".original_resolution: expected [H, W]");
        r.original_resolution = {res[0].get<int>(), res[1].get<int>()};
    }
    return r;
}

json record_to_json(const SampleRecord& r, TaskType type) {
    json j;
    j["image"] = r.image;
    switch (type) {
        case TaskType::seg: j["label"] = {{"mask", r.mask}}; break;
        case TaskType::cls: j["label"] = {{"class", r.class_id}}; break;
        case TaskType::reg: j["label"] = {{"value", r.value}}; break;
        case TaskType::det:
            j["label"] = {{"box", {r.box.cx, r.box.cy, r.box.bw, r.box.bh}}};
            break;
    }
    if (r.original_resolution[0] > 0)
        j["original_resolution"] = {r.original_resolution[0], r.original_resolution[1]};
    return j;
}

}  // namespace

TaskRegistry parse_manifest(const std::string& json_text, const std::string& base_dir) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("manifest: malformed JSON");
    if (!j.is_object() || !j.contains("tasks") || !j.at("tasks").is_array())
        throw ValidationError("manifest.tasks: missing or not an array");
    const auto& tasks = j.at("tasks");
    if (tasks.empty()) throw ValidationError("manifest.tasks: task list is empty");

    TaskRegistry reg;
    reg.base_dir = base_dir;
    std::map<std::string, int> seen;
    for (size_t i = 0; i < tasks.size(); ++i) {
        std::string where = "tasks[" + std::to_string(i) + "]";
        const json& t = tasks[i];
        if (!t.is_object()) throw ValidationError(where + ": task must be an object");
        TaskSpec spec;
        if (!t.contains("task_id") || !t.at("task_id").is_string() ||
            t.at("task_id").get<std::string>().empty())
            throw ValidationError(where + ".task_id: missing or empty");
        spec.task_id = t.at("task_id").get<std::string>();
        if (seen.count(spec.task_id))
            throw ValidationError(where + ".task_id: duplicate task id '" + spec.task_id +
                                  "' (also tasks[" + std::to_string(seen[spec.task_id]) +
                                  "])");
        seen[spec.task_id] = static_cast<int>(i);
        if (!t.contains("type") || !t.at("type").is_string())
            throw ValidationError(where + ".type: missing");
        try {
            spec.type = parse_task_type(t.at("type").get<std::string>());
        } catch (const ValidationError& e) {
            throw ValidationError(where + ".type: " + e.what());
        }
        spec.group = t.value("group", std::string{});
        if (t.contains("num_classes")) spec.num_classes = t.at("num_classes").get<int>();
        if (spec.type == TaskType::cls && spec.num_classes < 2)
            throw ValidationError(where + ".num_classes: classification needs >= 2, got " +
                                  std::to_string(spec.num_classes));
        if (spec.type == TaskType::seg && spec.num_classes < 2)
            throw ValidationError(where + ".num_classes: segmentation needs >= 2, got " +
                                  std::to_string(spec.num_classes));
        if (t.contains("original_resolution")) {
            auto res = t.at("original_resolution");
            if (!res.is_array() || res.size() != 2)
                throw ValidationError(where + ".original_resolution: expected [H, W]");
            spec.original_resolution = {res[0].get<int>(), res[1].get<int>()};
            if (spec.original_resolution[0] < 1 || spec.original_resolution[1] < 1)
                throw ValidationError(where + ".original_resolution: must be positive");
        }
        spec.lambda = t.value("lambda", 1.0);
        if (spec.lambda < 0) throw ValidationError(where + ".lambda: must be nonnegative");
        if (t.contains("paradigms")) {
            if (!t.at("paradigms").is_array())
                throw ValidationError(where + ".paradigms: expected an array");
            spec.paradigms.clear();
            for (const auto& p : t.at("paradigms")) {
                std::string name = p.get<std::string>();
                if (name != "ts" && name != "cg" && name != "au")
                    throw ValidationError(where + ".paradigms: unknown paradigm '" + name +
                                          "'");
                spec.paradigms.insert(name);
            }
            if (spec.paradigms.empty())
                throw ValidationError(where + ".paradigms: must not be empty");
        }
        for (const char* split : {"train", "test"}) {
            if (!t.contains(split)) continue;
            if (!t.at(split).is_array())
                throw ValidationError(where + "." + split + ": expected an array");
            auto& dst = std::string(split) == "train" ? spec.train : spec.test;
            const auto& arr = t.at(split);
            for (size_t s = 0; s < arr.size(); ++s)
                dst.push_back(parse_record(
                    arr[s], spec.type,
                    where + "." + split + "[" + std::to_string(s) + "]"));
        }
        reg.tasks.push_back(std::move(spec));
    }
    return reg;
}

TaskRegistry load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("manifest: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_manifest(text, fs::path(path).parent_path().string());
}

std::string manifest_to_json(const TaskRegistry& reg) {
    json tasks = json::array();
    for (const auto& t : reg.tasks) {
        json jt;
        jt["task_id"] = t.task_id;
        jt["type"] = task_type_name(t.type);
        jt["group"] = t.group;
        jt["num_classes"] = t.num_classes;
        jt["original_resolution"] = {t.original_resolution[0], t.original_resolution[1]};
        jt["lambda"] = t.lambda;
        jt["paradigms"] = t.paradigms;
        jt["train"] = json::array();
        jt["test"] = json::array();
        for (const auto& r : t.train) jt["train"].push_back(record_to_json(r, t.type));
        for (const auto& r : t.test) jt["test"].push_back(record_to_json(r, t.type));
        tasks.push_back(std::move(jt));
    }
    json j;
    j["tasks"] = std::move(tasks);
    return j.dump(2);
}

void save_manifest(const TaskRegistry& reg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << manifest_to_json(reg) << "\n";
}

}  // namespace usmt

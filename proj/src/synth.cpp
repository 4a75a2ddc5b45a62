#include "usmt/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "usmt/core/rng.hpp"
#include "usmt/data/png_io.hpp"

namespace usmt {

using nlohmann::json;
namespace fs = std::filesystem;

SynthPlan parse_synth_plan(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("synth plan: malformed JSON");
    if (!j.is_object() || !j.contains("tasks") || !j.at("tasks").is_array() ||
        j.at("tasks").empty())
        throw ValidationError("synth plan: 'tasks' missing, not an array, or empty");
    SynthPlan plan;
    for (size_t i = 0; i < j.at("tasks").size(); ++i) {
        std::string where = "tasks[" + std::to_string(i) + "]";
        const json& t = j.at("tasks")[i];
        SynthTaskPlan p;
        if (!t.contains("type") || !t.at("type").is_string())
            throw ValidationError(where + ".type: missing");
        p.type = parse_task_type(t.at("type").get<std::string>());
        p.group = t.value("group", std::string{"default"});
        p.task_id = t.value("task_id",
                            p.group + "_" + task_type_name(p.type) + std::to_string(i));
        if (!t.contains("train_count") || !t.at("train_count").is_number_integer())
            throw ValidationError(where + ".train_count: missing integer");
        p.train_count = t.at("train_count").get<int>();
        if (p.train_count < 1)
            throw ValidationError(where + ".train_count: must be >= 1, got " +
                                  std::to_string(p.train_count));
        p.test_count = t.value("test_count", 0);
        if (p.test_count < 0) throw ValidationError(where + ".test_count: negative");
        p.num_classes = t.value("num_classes", 2);
        if (p.num_classes < 2 || p.num_classes > 3)
            throw ValidationError(where + ".num_classes: synthetic tasks support 2 or 3");
        if (t.contains("original_resolution")) {
            auto res = t.at("original_resolution");
            if (!res.is_array() || res.size() != 2)
                throw ValidationError(where + ".original_resolution: expected [H, W]");
            p.original_resolution = {res[0].get<int>(), res[1].get<int>()};
            if (p.original_resolution[0] < 32 || p.original_resolution[1] < 32)
                throw ValidationError(where + ".original_resolution: too small (< 32)");
        }
        if (t.contains("paradigms")) {
            p.paradigms.clear();
            for (const auto& pj : t.at("paradigms")) {
                std::string name = pj.get<std::string>();
                if (name != "ts" && name != "cg" && name != "au")
                    throw ValidationError(where + ".paradigms: unknown paradigm '" + name +
                                          "'");
                p.paradigms.insert(name);
            }
        }
        for (auto& existing : plan.tasks)
            if (existing.task_id == p.task_id)
                throw ValidationError(where + ".task_id: duplicate '" + p.task_id + "'");
        plan.tasks.push_back(std::move(p));
    }
    return plan;
}

SynthPlan load_synth_plan(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("synth plan: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_synth_plan(text);
}

namespace {

enum class Shape { ellipse, rectangle, diamond };

struct ShapeParams {
    Shape kind;
    double cx, cy;  // pixel coordinates
    double ax, ay;  // semi-axes in pixels
    double brightness;
};

bool inside(const ShapeParams& s, double x, double y) {
    double dx = (x - s.cx) / s.ax, dy = (y - s.cy) / s.ay;
    switch (s.kind) {
        case Shape::ellipse: return dx * dx + dy * dy <= 1.0;
        case Shape::rectangle: return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
        case Shape::diamond: return std::abs(dx) + std::abs(dy) <= 1.0;
    }
    return false;
}

ShapeParams draw_shape(Rng& rng, int h, int w, Shape kind) {
    ShapeParams s;
    s.kind = kind;
    double m = std::min(h, w);
    s.ax = rng.uniform(0.12, 0.28) * m;
    s.ay = rng.uniform(0.12, 0.28) * m;
    s.cx = rng.uniform(0.35, 0.65) * w;
    s.cy = rng.uniform(0.35, 0.65) * h;
    s.brightness = rng.uniform(150.0, 220.0);
    return s;
}

}  // namespace

TaskRegistry synth_generate(const SynthPlan& plan, uint64_t seed, const std::string& out_dir,
                            bool force) {
    if (plan.tasks.empty()) throw ValidationError("synth plan has no tasks");
    fs::path out(out_dir);
    if (fs::exists(out) && !fs::is_empty(out) && !force)
        throw ValidationError("output directory '" + out_dir +
                              "' is not empty; pass --force to overwrite");
    fs::create_directories(out / "images");
    fs::create_directories(out / "masks");

    TaskRegistry reg;
    reg.base_dir = out.string();
    for (const auto& p : plan.tasks) {
        Rng rng(mix_seed(seed, p.task_id));
        fs::create_directories(out / "images" / p.task_id);
        if (p.type == TaskType::seg) fs::create_directories(out / "masks" / p.task_id);

        TaskSpec spec;
        spec.task_id = p.task_id;
        spec.type = p.type;
        spec.group = p.group;
        spec.num_classes = p.num_classes;
        spec.original_resolution = p.original_resolution;
        spec.paradigms = p.paradigms;

        int h = p.original_resolution[0], w = p.original_resolution[1];
        int total = p.train_count + p.test_count;
        for (int i = 0; i < total; ++i) {
            Shape kind;
            if (p.type == TaskType::cls)
                kind = static_cast<Shape>(i % p.num_classes);  // balanced classes
            else if (p.type == TaskType::reg)
                kind = Shape::ellipse;
            else
                kind = static_cast<Shape>(rng.uniform_int(0, 1));
            ShapeParams shape = draw_shape(rng, h, w, kind);

            ImageU8 img;
            img.channels = 1;
            img.height = h;
            img.width = w;
            img.data.resize(static_cast<size_t>(h) * w);
            ImageU8 mask = img;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    double u = rng.uniform();
                    bool in = inside(shape, x, y);
                    double v = in ? shape.brightness * (0.75 + 0.25 * u)
                                  : 20.0 + 60.0 * u * u;
                    img.data[static_cast<size_t>(y) * w + x] =
                        static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
                    mask.data[static_cast<size_t>(y) * w + x] = in ? 1 : 0;
                }

            char name[32];
            std::snprintf(name, sizeof(name), "%04d.png", i);
            std::string img_rel = "images/" + p.task_id + "/" + name;
            write_png((out / img_rel).string(), img);

            SampleRecord rec;
            rec.image = img_rel;
            switch (p.type) {
                case TaskType::seg: {
                    std::string mask_rel = "masks/" + p.task_id + "/" + name;
                    write_png((out / mask_rel).string(), mask);
                    rec.mask = mask_rel;
                    break;
                }
                case TaskType::cls:
                    rec.class_id = static_cast<int>(kind);
                    break;
                case TaskType::reg:
                    rec.value = 2.0 * std::max(shape.ax, shape.ay);  // major axis, pixels
                    rec.has_value = true;
                    break;
                case TaskType::det:
                    rec.box.cx = shape.cx / w;
                    rec.box.cy = shape.cy / h;
                    rec.box.bw = 2.0 * shape.ax / w;
                    rec.box.bh = 2.0 * shape.ay / h;
                    rec.has_box = true;
                    break;
            }
            (i < p.train_count ? spec.train : spec.test).push_back(std::move(rec));
        }
        reg.tasks.push_back(std::move(spec));
    }
    save_manifest(reg, (out / "manifest.json").string());
    return reg;
}

}  // namespace usmt

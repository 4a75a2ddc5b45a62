#include "usmt/trainer/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "usmt/core/serialize.hpp"

namespace usmt {

using nlohmann::json;
namespace fs = std::filesystem;

void save_checkpoint(const std::string& dir, MultiTaskModel& model,
                     const CheckpointMeta& meta) {
    fs::create_directories(dir);
    NamedTensors weights;
    for (auto& p : model.params()) weights.add(p.name, p.var.value());
    write_weights((fs::path(dir) / "weights.bin").string(), weights);

    TaskRegistry snapshot;
    snapshot.tasks = meta.tasks;
    json j;
    j["paradigm"] = meta.paradigm;
    j["unit_id"] = meta.unit_id;
    j["moe_enabled"] = meta.moe_enabled;
    j["seed"] = meta.seed;
    j["config_hash"] = meta.config_hash;
    j["best_score"] = meta.best_score;
    j["best_epoch"] = meta.best_epoch;
    j["mre_baselines"] = meta.mre_baselines;
    j["model"] = model_config_to_json(meta.model);
    j["optimizer"] = optimizer_config_to_json(meta.optim);
    j["registry"] = json::parse(manifest_to_json(snapshot));
    j["data_base_dir"] = meta.data_base_dir;
    std::ofstream f(fs::path(dir) / "meta.json");
    if (!f) throw IoError("cannot write " + dir + "/meta.json");
    f << j.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    std::ifstream f(fs::path(dir) / "meta.json");
    if (!f) throw IoError("cannot read " + dir + "/meta.json");
    json j = json::parse(std::string((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>()),
                         nullptr, false);
    if (j.is_discarded()) throw ValidationError(dir + "/meta.json: malformed JSON");

    LoadedCheckpoint out;
    try {
        out.meta.paradigm = j.at("paradigm").get<std::string>();
        out.meta.unit_id = j.at("unit_id").get<std::string>();
        out.meta.moe_enabled = j.at("moe_enabled").get<bool>();
        out.meta.seed = j.at("seed").get<uint64_t>();
        out.meta.config_hash = j.at("config_hash").get<std::string>();
        out.meta.best_score = j.at("best_score").get<double>();
        out.meta.best_epoch = j.at("best_epoch").get<int>();
        if (j.contains("mre_baselines"))
            out.meta.mre_baselines =
                j.at("mre_baselines").get<std::map<std::string, double>>();
        out.meta.model = model_config_from_json(j.at("model"));
        out.meta.optim = optimizer_config_from_json(j.at("optimizer"));
        out.meta.tasks = parse_manifest(j.at("registry").dump(), "").tasks;
        out.meta.data_base_dir = j.value("data_base_dir", std::string{});
    } catch (const json::exception& e) {
        throw ValidationError(dir + "/meta.json: " + e.what());
    }

    out.model = std::make_unique<MultiTaskModel>(out.meta.model, out.meta.tasks,
                                                 out.meta.moe_enabled, out.meta.seed);
    NamedTensors weights = read_weights((fs::path(dir) / "weights.bin").string());
    for (auto& p : out.model->params()) {
        const Tensor* src = weights.find(p.name);
        if (!src)
            throw ValidationError(dir + ": weights.bin is missing parameter '" + p.name +
                                  "'");
        if (src->shape != p.var.value().shape)
            throw ShapeError(dir + ": parameter '" + p.name + "' has shape " +
                             src->shape_str() + ", model expects " +
                             p.var.value().shape_str());
        p.var.mutable_value() = *src;
    }
    return out;
}

}  // namespace usmt

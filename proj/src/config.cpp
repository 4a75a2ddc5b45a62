#include "usmt/trainer/config.hpp"

#include <sstream>

#include "usmt/core/rng.hpp"

namespace usmt {

using nlohmann::json;

json model_config_to_json(const ModelConfig& cfg) {
    json j;
    j["encoder"] = {{"image_size", cfg.encoder.image_size},
                    {"patch_size", cfg.encoder.patch_size},
                    {"embed_dim", cfg.encoder.embed_dim},
                    {"depth", cfg.encoder.depth},
                    {"num_heads", cfg.encoder.num_heads},
                    {"moe_layers", cfg.encoder.moe_layers},
                    {"num_experts", cfg.encoder.num_experts},
                    {"task_embed_dim", cfg.encoder.task_embed_dim},
                    {"mlp_ratio", cfg.encoder.mlp_ratio}};
    j["seg"] = {{"tap_layers", cfg.seg.tap_layers}, {"fusion_dim", cfg.seg.fusion_dim}};
    j["det_channels"] = cfg.det_channels;
    return j;
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig cfg;
    try {
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            cfg.encoder.image_size = e.value("image_size", cfg.encoder.image_size);
            cfg.encoder.patch_size = e.value("patch_size", cfg.encoder.patch_size);
            cfg.encoder.embed_dim = e.value("embed_dim", cfg.encoder.embed_dim);
            cfg.encoder.depth = e.value("depth", cfg.encoder.depth);
            cfg.encoder.num_heads = e.value("num_heads", cfg.encoder.num_heads);
            if (e.contains("moe_layers"))
                cfg.encoder.moe_layers = e.at("moe_layers").get<std::vector<int>>();
            cfg.encoder.num_experts = e.value("num_experts", cfg.encoder.num_experts);
            cfg.encoder.task_embed_dim = e.value("task_embed_dim", cfg.encoder.task_embed_dim);
            cfg.encoder.mlp_ratio = e.value("mlp_ratio", cfg.encoder.mlp_ratio);
        }
        if (j.contains("seg")) {
            const auto& s = j.at("seg");
            if (s.contains("tap_layers"))
                cfg.seg.tap_layers = s.at("tap_layers").get<std::vector<int>>();
            cfg.seg.fusion_dim = s.value("fusion_dim", cfg.seg.fusion_dim);
        }
        cfg.det_channels = j.value("det_channels", cfg.det_channels);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("model config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

json optimizer_config_to_json(const OptimizerConfig& cfg) {
    return json{{"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"weight_decay", cfg.weight_decay},
                {"lr_backbone", cfg.lr_backbone},
                {"lr_seg_head", cfg.lr_seg_head},
                {"lr_moe", cfg.lr_moe},
                {"lr_heads", cfg.lr_heads},
                {"clip_norm", cfg.clip_norm},
                {"clip_enabled", cfg.clip_enabled},
                {"val_fraction", cfg.val_fraction},
                {"augment", cfg.augment},
                {"lr_backbone_grid", cfg.lr_backbone_grid}};
}

OptimizerConfig optimizer_config_from_json(const json& j) {
    OptimizerConfig cfg;
    try {
        cfg.epochs = j.value("epochs", cfg.epochs);
        cfg.batch_size = j.value("batch_size", cfg.batch_size);
        cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
        cfg.lr_backbone = j.value("lr_backbone", cfg.lr_backbone);
        cfg.lr_seg_head = j.value("lr_seg_head", cfg.lr_seg_head);
        cfg.lr_moe = j.value("lr_moe", cfg.lr_moe);
        cfg.lr_heads = j.value("lr_heads", cfg.lr_heads);
        cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
        cfg.clip_enabled = j.value("clip_enabled", cfg.clip_enabled);
        cfg.val_fraction = j.value("val_fraction", cfg.val_fraction);
        cfg.augment = j.value("augment", cfg.augment);
        if (j.contains("lr_backbone_grid"))
            cfg.lr_backbone_grid = j.at("lr_backbone_grid").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("optimizer config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

std::string config_hash(const ModelConfig& mc, const OptimizerConfig& oc) {
    json j;
    j["model"] = model_config_to_json(mc);
    j["optimizer"] = optimizer_config_to_json(oc);
    uint64_t h = fnv1a(j.dump());
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace usmt

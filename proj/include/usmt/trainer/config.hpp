#ifndef USMT_TRAINER_CONFIG_HPP
#define USMT_TRAINER_CONFIG_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "usmt/heads/heads.hpp"
#include "usmt/nn/encoder.hpp"

namespace usmt {

struct ModelConfig {
    EncoderConfig encoder;
    SegHeadConfig seg;
    int det_channels = 64;

    void validate() const {
        encoder.validate();
        seg.validate(encoder.depth);
        if (det_channels < 1) throw ConfigError("det_channels must be >= 1");
    }
};

// Paper-default optimization settings; per-component learning rates.
struct OptimizerConfig {
    int epochs = 200;
    int batch_size = 16;
    double weight_decay = 1e-4;
    double lr_backbone = 2e-5;
    double lr_seg_head = 1e-5;  // dense decoder
    double lr_moe = 2e-4;       // experts, gating, task embeddings
    double lr_heads = 1e-3;     // pooled + detection heads
    double clip_norm = 1.0;
    bool clip_enabled = true;
    double val_fraction = 0.2;
    bool augment = false;
    // limited search grid for the backbone lr; other components scale
    // proportionally from the defaults above
    std::vector<double> lr_backbone_grid = {1e-5, 2e-5, 5e-5};

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw ConfigError("epochs/batch_size must be >= 1");
        for (double lr : {lr_backbone, lr_seg_head, lr_moe, lr_heads})
            if (lr <= 0) throw ConfigError("learning rates must be positive");
        if (weight_decay < 0) throw ConfigError("weight_decay must be nonnegative");
        if (val_fraction <= 0 || val_fraction >= 1)
            throw ConfigError("val_fraction must be in (0,1)");
        bool has_default = false;
        for (double lr : lr_backbone_grid) has_default = has_default || lr == lr_backbone;
        if (!lr_backbone_grid.empty() && !has_default)
            throw ConfigError("lr grid must contain the configured backbone lr");
    }
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json optimizer_config_to_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const nlohmann::json& j);

// FNV-1a hash of the canonical config serialization, hex-encoded.
std::string config_hash(const ModelConfig& mc, const OptimizerConfig& oc);

}  // namespace usmt

#endif

#include "usmt/trainer/optimizer.hpp"

#include <cmath>

namespace usmt {

AdamW::AdamW(std::vector<TaggedParam>& params, const OptimizerConfig& cfg)
    : params_(&params), cfg_(cfg) {
    cfg_.validate();
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (auto& p : params) {
        m_.emplace_back(p.var.value().shape);
        v_.emplace_back(p.var.value().shape);
    }
}

double AdamW::lr_for(ParamGroup g) const {
    switch (g) {
        case ParamGroup::backbone: return cfg_.lr_backbone;
        case ParamGroup::moe: return cfg_.lr_moe;
        case ParamGroup::seg_head: return cfg_.lr_seg_head;
        case ParamGroup::task_head: return cfg_.lr_heads;
    }
    return cfg_.lr_backbone;
}

void AdamW::zero_grad() {
    for (auto& p : *params_) p.var.zero_grad();
}

double AdamW::step() {
    ++t_;
    double norm_sq = 0.0;
    for (auto& p : *params_) {
        const auto& g = p.var.grad();
        for (float x : g.data) norm_sq += static_cast<double>(x) * x;
    }
    double norm = std::sqrt(norm_sq);
    float clip_scale = 1.0f;
    if (cfg_.clip_enabled && norm > cfg_.clip_norm && norm > 0)
        clip_scale = static_cast<float>(cfg_.clip_norm / norm);

    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (size_t i = 0; i < params_->size(); ++i) {
        auto& p = (*params_)[i];
        float lr = static_cast<float>(lr_for(p.group));
        float wd = static_cast<float>(cfg_.weight_decay);
        auto& val = p.var.mutable_value();
        auto& grad = p.var.grad();
        auto& m = m_[i];
        auto& v = v_[i];
        for (size_t k = 0; k < val.data.size(); ++k) {
            float g = grad.data[k] * clip_scale;
            m.data[k] = static_cast<float>(b1) * m.data[k] + static_cast<float>(1 - b1) * g;
            v.data[k] =
                static_cast<float>(b2) * v.data[k] + static_cast<float>(1 - b2) * g * g;
            float mhat = m.data[k] / static_cast<float>(bc1);
            float vhat = v.data[k] / static_cast<float>(bc2);
            val.data[k] -=
                lr * (mhat / (std::sqrt(vhat) + static_cast<float>(eps)) + wd * val.data[k]);
        }
    }
    return norm;
}

}  // namespace usmt

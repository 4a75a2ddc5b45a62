#ifndef USMT_HEADS_HEADS_HPP
#define USMT_HEADS_HEADS_HPP

#include <array>
#include <map>
#include <string>
#include <vector>

#include "usmt/heads/boxes.hpp"
#include "usmt/nn/modules.hpp"

namespace usmt {

struct SegHeadConfig {
    std::vector<int> tap_layers = {3, 6, 9, 12};
    int fusion_dim = 256;
    int num_classes = 2;

    void validate(int depth) const {
        if (tap_layers.size() != 4)
            throw ConfigError("segmentation head expects 4 tap layers, got " +
                              std::to_string(tap_layers.size()));
        for (size_t i = 0; i < tap_layers.size(); ++i) {
            if (tap_layers[i] < 1 || tap_layers[i] > depth)
                throw ConfigError("tap layer " + std::to_string(tap_layers[i]) +
                                  " outside [1," + std::to_string(depth) + "]");
            if (i > 0 && tap_layers[i] <= tap_layers[i - 1])
                throw ConfigError("tap layers must be strictly ascending");
        }
        if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
        if (fusion_dim < 1) throw ConfigError("fusion_dim must be >= 1");
    }
};

namespace nn {

namespace detail {

template <class S>
VarT<S> conv_param_init(Rng& rng, int out_c, int in_c, int k) {
    TensorT<S> w({out_c, in_c, k, k});
    double std = std::sqrt(2.0 / (in_c * k * k));
    rng.fill_normal(w, 0.0, std);
    return VarT<S>::param(std::move(w));
}

// (N x D) patch tokens -> {D, g, g}
template <class S>
VarT<S> tokens_to_map(VarT<S> tokens, int g) {
    int d = tokens.value().cols();
    return ops::reshape(ops::transpose2d(tokens), {d, g, g});
}

}  // namespace detail

// Dense prediction head: four tapped token matrices are projected, rescaled
// to a feature pyramid, fused coarse-to-fine and decoded at the input
// resolution.
template <class S>
class DptSegHeadT {
  public:
    DptSegHeadT() = default;
    DptSegHeadT(const SegHeadConfig& cfg, int embed_dim, int depth, Rng& rng) : cfg_(cfg) {
        cfg_.validate(depth);
        int c = cfg_.fusion_dim;
        for (int i = 0; i < 4; ++i) {
            proj_[i] = LinearT<S>(embed_dim, c, rng);
            refine_w_[i] = detail::conv_param_init<S>(rng, c, c, 3);
            refine_b_[i] = VarT<S>::param(TensorT<S>({c}));
        }
        for (int i = 0; i < 3; ++i) {
            fuse_w_[i] = detail::conv_param_init<S>(rng, c, c, 3);
            fuse_b_[i] = VarT<S>::param(TensorT<S>({c}));
        }
        pre_w_ = detail::conv_param_init<S>(rng, c, c, 3);
        pre_b_ = VarT<S>::param(TensorT<S>({c}));
        out_w_ = detail::conv_param_init<S>(rng, cfg_.num_classes, c, 1);
        out_b_ = VarT<S>::param(TensorT<S>({cfg_.num_classes}));
    }

    const SegHeadConfig& config() const { return cfg_; }

    // taps: encoder layer -> (N x D) patch tokens; returns {num_classes, H, W}.
    VarT<S> forward(const std::map<int, VarT<S>>& taps, int grid, int out_h,
                    int out_w) const {
        std::array<VarT<S>, 4> feats;
        for (int i = 0; i < 4; ++i) {
            auto it = taps.find(cfg_.tap_layers[i]);
            if (it == taps.end())
                throw ConfigError("tapped layer " + std::to_string(cfg_.tap_layers[i]) +
                                  " not provided to the segmentation head");
            int size = scale_size(grid, i);
            auto fm = detail::tokens_to_map(proj_[i].forward(it->second), grid);
            fm = ops::resize_bilinear(fm, size, size);
            feats[i] = ops::relu(ops::conv2d(fm, refine_w_[i], refine_b_[i], 1, 1));
        }
        auto x = feats[3];
        for (int i = 2; i >= 0; --i) {
            int size = scale_size(grid, i);
            x = ops::resize_bilinear(x, size, size);
            x = ops::relu(ops::conv2d(ops::add(x, feats[i]), fuse_w_[i], fuse_b_[i], 1, 1));
        }
        x = ops::relu(ops::conv2d(x, pre_w_, pre_b_, 1, 1));
        x = ops::resize_bilinear(x, out_h, out_w);
        return ops::conv2d(x, out_w_, out_b_, 1, 0);
    }

    void collect(const std::string& prefix, ParamList<S>& out) {
        for (int i = 0; i < 4; ++i) {
            proj_[i].collect(prefix + ".proj" + std::to_string(i + 1), out);
            out.push_back({prefix + ".refine" + std::to_string(i + 1) + "_w", refine_w_[i]});
            out.push_back({prefix + ".refine" + std::to_string(i + 1) + "_b", refine_b_[i]});
        }
        for (int i = 0; i < 3; ++i) {
            out.push_back({prefix + ".fuse" + std::to_string(i + 1) + "_w", fuse_w_[i]});
            out.push_back({prefix + ".fuse" + std::to_string(i + 1) + "_b", fuse_b_[i]});
        }
        out.push_back({prefix + ".pre_w", pre_w_});
        out.push_back({prefix + ".pre_b", pre_b_});
        out.push_back({prefix + ".out_w", out_w_});
        out.push_back({prefix + ".out_b", out_b_});
    }

  private:
    // pyramid sizes: 4g, 2g, g, ceil(g/2) for taps 1..4
    static int scale_size(int grid, int tap_idx) {
        switch (tap_idx) {
            case 0: return grid * 4;
            case 1: return grid * 2;
            case 2: return grid;
            default: return std::max(1, (grid + 1) / 2);
        }
    }

    SegHeadConfig cfg_;
    std::array<LinearT<S>, 4> proj_;
    std::array<VarT<S>, 4> refine_w_, refine_b_;
    std::array<VarT<S>, 3> fuse_w_, fuse_b_;
    VarT<S> pre_w_, pre_b_, out_w_, out_b_;
};

// Global-average-pool + two fully connected layers.
template <class S>
class PooledHeadT {
  public:
    PooledHeadT() = default;
    PooledHeadT(int embed_dim, int out_dim, Rng& rng)
        : fc1_(embed_dim, embed_dim, rng), fc2_(embed_dim, out_dim, rng) {}

    // patch tokens (N x D) -> (out_dim)
    VarT<S> forward(VarT<S> patch_tokens) const {
        auto pooled = ops::mean_rows(patch_tokens);
        auto h = ops::gelu(fc1_.forward(pooled));
        auto logits = fc2_.forward(h);
        return ops::reshape(logits, {logits.value().cols()});
    }

    void collect(const std::string& prefix, ParamList<S>& out) {
        fc1_.collect(prefix + ".fc1", out);
        fc2_.collect(prefix + ".fc2", out);
    }

  private:
    LinearT<S> fc1_, fc2_;
};

template <class S>
class ClsHeadT {
  public:
    ClsHeadT() = default;
    ClsHeadT(int embed_dim, int num_classes, Rng& rng) : head_(embed_dim, num_classes, rng) {
        if (num_classes < 2)
            throw ConfigError("classification head needs num_classes >= 2, got " +
                              std::to_string(num_classes));
    }
    VarT<S> forward(VarT<S> patch_tokens) const { return head_.forward(patch_tokens); }
    void collect(const std::string& prefix, ParamList<S>& out) { head_.collect(prefix, out); }

  private:
    PooledHeadT<S> head_;
};

template <class S>
class RegHeadT {
  public:
    RegHeadT() = default;
    RegHeadT(int embed_dim, Rng& rng) : head_(embed_dim, 1, rng) {}
    // scalar prediction in resized-pixel units
    VarT<S> forward(VarT<S> patch_tokens) const { return head_.forward(patch_tokens); }
    void collect(const std::string& prefix, ParamList<S>& out) { head_.collect(prefix, out); }

  private:
    PooledHeadT<S> head_;
};

// Center-cell detector: objectness heatmap over the feature grid plus box
// offsets/extents, all sigmoid-activated.
template <class S>
class DetHeadT {
  public:
    struct Output {
        VarT<S> heatmap;     // {h, w} probabilities
        VarT<S> box_params;  // {4, h, w} in (0,1)
    };

    DetHeadT() = default;
    DetHeadT(int embed_dim, int channels, Rng& rng) : channels_(channels) {
        stem_w_ = detail::conv_param_init<S>(rng, channels, embed_dim, 3);
        stem_b_ = VarT<S>::param(TensorT<S>({channels}));
        heat_w_ = detail::conv_param_init<S>(rng, 1, channels, 1);
        // bias the objectness prior low so early heatmaps are near-empty
        heat_b_ = VarT<S>::param(TensorT<S>::full({1}, S(-2.19)));
        box_w_ = detail::conv_param_init<S>(rng, 4, channels, 1);
        box_b_ = VarT<S>::param(TensorT<S>({4}));
    }

    // fmap: {D, g, g}
    Output forward(VarT<S> fmap) const {
        auto x = ops::relu(ops::conv2d(fmap, stem_w_, stem_b_, 1, 1));
        auto heat = ops::sigmoid(ops::conv2d(x, heat_w_, heat_b_, 1, 0));
        auto box = ops::sigmoid(ops::conv2d(x, box_w_, box_b_, 1, 0));
        int g_h = heat.value().dim(1), g_w = heat.value().dim(2);
        Output out;
        out.heatmap = ops::reshape(heat, {g_h, g_w});
        out.box_params = box;
        return out;
    }

    DetectionGrid to_grid(const Output& out) const {
        DetectionGrid grid;
        grid.heatmap = out.heatmap.value().template cast<double>();
        grid.box_params = out.box_params.value().template cast<double>();
        return grid;
    }

    void collect(const std::string& prefix, ParamList<S>& out) {
        out.push_back({prefix + ".stem_w", stem_w_});
        out.push_back({prefix + ".stem_b", stem_b_});
        out.push_back({prefix + ".heat_w", heat_w_});
        out.push_back({prefix + ".heat_b", heat_b_});
        out.push_back({prefix + ".box_w", box_w_});
        out.push_back({prefix + ".box_b", box_b_});
    }

  private:
    int channels_ = 0;
    VarT<S> stem_w_, stem_b_, heat_w_, heat_b_, box_w_, box_b_;
};

}  // namespace nn
}  // namespace usmt

#endif

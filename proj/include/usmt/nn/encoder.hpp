#ifndef USMT_NN_ENCODER_HPP
#define USMT_NN_ENCODER_HPP

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "usmt/core/serialize.hpp"
#include "usmt/nn/moe.hpp"

namespace usmt {

struct EncoderConfig {
    int image_size = 224;
    int patch_size = 16;
    int embed_dim = 768;
    int depth = 12;
    int num_heads = 12;
    std::vector<int> moe_layers = {7, 8, 9, 10, 11, 12};  // 1-based
    int num_experts = 4;
    int task_embed_dim = 64;
    bool moe_enabled = true;
    int mlp_ratio = 4;

    int grid() const { return image_size / patch_size; }
    int num_patches() const { return grid() * grid(); }

    void validate() const {
        if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
            throw ConfigError("image_size " + std::to_string(image_size) +
                              " must be a positive multiple of patch_size " +
                              std::to_string(patch_size));
        if (embed_dim <= 0 || depth <= 0 || num_heads <= 0)
            throw ConfigError("embed_dim/depth/num_heads must be positive");
        if (embed_dim % num_heads != 0)
            throw ConfigError("embed_dim must be divisible by num_heads");
        if (num_experts < 1) throw ConfigError("num_experts must be >= 1");
        if (task_embed_dim < 1) throw ConfigError("task_embed_dim must be >= 1");
        for (int l : moe_layers)
            if (l < 1 || l > depth)
                throw ConfigError("moe layer index " + std::to_string(l) +
                                  " outside [1," + std::to_string(depth) + "]");
    }
};

namespace nn {

template <class S>
struct EncodeOutT {
    VarT<S> tokens;              // ((1+N) x D) after the final norm
    VarT<S> fmap;                // {D, g, g} final-layer patch tokens
    std::map<int, VarT<S>> taps; // layer index -> (N x D) patch tokens
};

// ViT encoder with pre-norm blocks. Layers listed in moe_layers carry a
// task-conditioned MoE in place of the feed-forward sublayer when MoE is
// enabled; otherwise the encoder is a plain ViT with no MoE parameters.
template <class S>
class VitEncoderT {
  public:
    VitEncoderT(const EncoderConfig& cfg, uint64_t seed) : cfg_(cfg), embed_rng_(mix_seed(seed, "task_embed")) {
        cfg_.validate();
        Rng rng(mix_seed(seed, "encoder"));
        int d = cfg_.embed_dim;
        int n = cfg_.num_patches();
        int patch_in = 3 * cfg_.patch_size * cfg_.patch_size;
        patch_ = LinearT<S>(patch_in, d, rng);
        TensorT<S> cls({1, d});
        rng.fill_normal(cls, 0.0, 0.02);
        cls_token_ = VarT<S>::param(std::move(cls));
        TensorT<S> pos({n + 1, d});
        rng.fill_normal(pos, 0.0, 0.02);
        pos_embed_ = VarT<S>::param(std::move(pos));

        std::set<int> moe_set(cfg_.moe_layers.begin(), cfg_.moe_layers.end());
        task_embed_ = TaskEmbeddingT<S>(cfg_.task_embed_dim);
        for (int layer = 1; layer <= cfg_.depth; ++layer) {
            Block blk;
            blk.ln1 = LayerNormT<S>(d);
            blk.attn = MultiHeadAttentionT<S>(d, cfg_.num_heads, rng);
            blk.ln2 = LayerNormT<S>(d);
            blk.is_moe = cfg_.moe_enabled && moe_set.count(layer) > 0;
            if (blk.is_moe)
                blk.moe = MoeBlockT<S>(layer, d, d * cfg_.mlp_ratio, cfg_.num_experts,
                                       cfg_.task_embed_dim, rng);
            else
                blk.mlp = MlpT<S>(d, d * cfg_.mlp_ratio, rng);
            blocks_.push_back(std::move(blk));
        }
        norm_ = LayerNormT<S>(d);
    }

    const EncoderConfig& config() const { return cfg_; }

    void register_task(const std::string& task_id) {
        task_embed_.register_task(task_id, embed_rng_);
    }

    bool has_task(const std::string& task_id) const { return task_embed_.has(task_id); }

    TaskEmbeddingT<S>& task_embedding() { return task_embed_; }
    const TaskEmbeddingT<S>& task_embedding() const { return task_embed_; }

    // Current embedding row for a registered task.
    TensorT<S> task_embed(const std::string& task_id) const { return task_embed_.embed(task_id); }

    int num_moe_blocks() const {
        int c = 0;
        for (const auto& b : blocks_) c += b.is_moe ? 1 : 0;
        return c;
    }

    MoeBlockT<S>& moe_block_at(int layer) {
        for (auto& b : blocks_)
            if (b.is_moe && b.moe.layer_index == layer) return b.moe;
        throw ConfigError("layer " + std::to_string(layer) + " has no MoE block");
    }

    // image: {3, image_size, image_size}. tap_layers requests intermediate
    // patch-token matrices (block outputs) for dense heads.
    EncodeOutT<S> encode(const TensorT<S>& image, const std::string& task_id,
                         const std::vector<int>& tap_layers = {}) const {
        if (image.ndim() != 3 || image.dim(0) != 3 || image.dim(1) != cfg_.image_size ||
            image.dim(2) != cfg_.image_size)
            throw ShapeError("encode expects {3," + std::to_string(cfg_.image_size) + "," +
                             std::to_string(cfg_.image_size) + "}, got " + image.shape_str());
        VarT<S> e_t;
        if (cfg_.moe_enabled && num_moe_blocks() > 0) e_t = task_embed_.lookup(task_id);
        for (int l : tap_layers)
            if (l < 1 || l > cfg_.depth)
                throw ConfigError("tap layer " + std::to_string(l) + " outside [1," +
                                  std::to_string(cfg_.depth) + "]");

        int n = cfg_.num_patches();
        auto patches = VarT<S>::constant(patchify(image));
        auto x = patch_.forward(patches);                         // (N x D)
        x = ops::concat_rows<S>({cls_token_, x});                 // (N+1 x D)
        x = ops::add(x, pos_embed_);

        EncodeOutT<S> out;
        std::set<int> taps(tap_layers.begin(), tap_layers.end());
        for (size_t i = 0; i < blocks_.size(); ++i) {
            const Block& blk = blocks_[i];
            auto h = ops::add(x, blk.attn.forward(blk.ln1.forward(x)));
            auto ff_in = blk.ln2.forward(h);
            auto ff = blk.is_moe ? blk.moe.forward(ff_in, e_t) : blk.mlp.forward(ff_in);
            x = ops::add(h, ff);
            int layer = static_cast<int>(i) + 1;
            if (taps.count(layer)) out.taps[layer] = ops::slice_rows(x, 1, n);
        }
        out.tokens = norm_.forward(x);
        auto patch_tokens = ops::slice_rows(out.tokens, 1, n);
        out.fmap = ops::reshape(ops::transpose2d(patch_tokens),
                                {cfg_.embed_dim, cfg_.grid(), cfg_.grid()});
        return out;
    }

    void collect_params(ParamList<S>& out) {
        patch_.collect("encoder.patch", out);
        out.push_back({"encoder.cls_token", cls_token_});
        out.push_back({"encoder.pos_embed", pos_embed_});
        for (size_t i = 0; i < blocks_.size(); ++i) {
            std::string lp = "encoder.layer." + std::to_string(i + 1);
            auto& blk = blocks_[i];
            blk.ln1.collect(lp + ".ln1", out);
            blk.attn.collect(lp + ".attn", out);
            blk.ln2.collect(lp + ".ln2", out);
            if (blk.is_moe)
                blk.moe.collect("moe.layer." + std::to_string(i + 1), out);
            else
                blk.mlp.collect(lp + ".mlp", out);
        }
        norm_.collect("encoder.norm", out);
        task_embed_.collect(out);
    }

    // Copies matching entries from an external weight file (e.g. a converted
    // pretrained ViT). Plain feed-forward weights found for a MoE layer are
    // replicated into every expert so the block starts as the pretrained MLP.
    int load_pretrained(const NamedTensors& w) {
        ParamList<S> params;
        collect_params(params);
        int loaded = 0;
        for (auto& p : params) {
            const Tensor* src = w.find(p.name);
            if (!src) continue;
            copy_into(p.var, *src, p.name);
            ++loaded;
        }
        for (auto& blk : blocks_) {
            if (!blk.is_moe) continue;
            std::string lp = "encoder.layer." + std::to_string(blk.moe.layer_index) + ".mlp";
            for (auto& expert : blk.moe.experts) {
                for (auto& [suffix, var] :
                     std::vector<std::pair<std::string, VarT<S>*>>{{".fc1_w", &expert.fc1.w},
                                                                   {".fc1_b", &expert.fc1.b},
                                                                   {".fc2_w", &expert.fc2.w},
                                                                   {".fc2_b", &expert.fc2.b}}) {
                    const Tensor* src = w.find(lp + suffix);
                    if (src) {
                        copy_into(*var, *src, lp + suffix);
                        ++loaded;
                    }
                }
            }
        }
        return loaded;
    }

  private:
    struct Block {
        LayerNormT<S> ln1;
        MultiHeadAttentionT<S> attn;
        LayerNormT<S> ln2;
        bool is_moe = false;
        MlpT<S> mlp;
        MoeBlockT<S> moe;
    };

    static void copy_into(VarT<S>& dst, const Tensor& src, const std::string& name) {
        if (dst.value().shape != src.shape)
            throw ShapeError("weight '" + name + "': file has " + src.shape_str() +
                             ", model expects " + dst.value().shape_str());
        for (size_t i = 0; i < src.data.size(); ++i)
            dst.mutable_value().data[i] = static_cast<S>(src.data[i]);
    }

    TensorT<S> patchify(const TensorT<S>& image) const {
        int p = cfg_.patch_size, g = cfg_.grid();
        TensorT<S> out({g * g, 3 * p * p});
        for (int gy = 0; gy < g; ++gy)
            for (int gx = 0; gx < g; ++gx) {
                int row = gy * g + gx;
                int col = 0;
                for (int c = 0; c < 3; ++c)
                    for (int py = 0; py < p; ++py)
                        for (int px = 0; px < p; ++px)
                            out.at2(row, col++) = image.at3(c, gy * p + py, gx * p + px);
            }
        return out;
    }

    EncoderConfig cfg_;
    Rng embed_rng_;
    LinearT<S> patch_;
    VarT<S> cls_token_;
    VarT<S> pos_embed_;  // ((N+1) x D)
    std::vector<Block> blocks_;
    LayerNormT<S> norm_;
    TaskEmbeddingT<S> task_embed_;
};

using VitEncoder = VitEncoderT<float>;

}  // namespace nn
}  // namespace usmt

#endif

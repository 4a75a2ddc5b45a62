#ifndef USMT_TRAINER_MODEL_HPP
#define USMT_TRAINER_MODEL_HPP

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "usmt/data/preprocess.hpp"
#include "usmt/metrics/metrics.hpp"
#include "usmt/objectives/losses.hpp"
#include "usmt/trainer/config.hpp"

namespace usmt {

enum class ParamGroup { backbone, moe, seg_head, task_head };

struct TaggedParam {
    std::string name;
    Var var;
    ParamGroup group;
};

// Shared encoder plus one head per task. A model instance is mutated by a
// single training thread; inference on a non-training instance is safe to
// run concurrently.
class MultiTaskModel {
  public:
    MultiTaskModel(const ModelConfig& cfg, std::vector<TaskSpec> tasks, bool moe_enabled,
                   uint64_t seed)
        : cfg_(cfg), tasks_(std::move(tasks)) {
        cfg_.validate();
        cfg_.encoder.moe_enabled = moe_enabled;
        std::sort(tasks_.begin(), tasks_.end(),
                  [](const TaskSpec& a, const TaskSpec& b) { return a.task_id < b.task_id; });
        encoder_ = std::make_unique<nn::VitEncoderT<float>>(cfg_.encoder, seed);
        for (const auto& t : tasks_) {
            if (by_id_.count(t.task_id))
                throw ValidationError("duplicate task '" + t.task_id + "' in model");
            by_id_[t.task_id] = &t;
            if (moe_enabled) encoder_->register_task(t.task_id);
            Rng head_rng(mix_seed(seed, "head/" + t.task_id));
            switch (t.type) {
                case TaskType::seg: {
                    SegHeadConfig sc = cfg_.seg;
                    sc.num_classes = t.num_classes;
                    seg_heads_.emplace(t.task_id,
                                       nn::DptSegHeadT<float>(sc, cfg_.encoder.embed_dim,
                                                              cfg_.encoder.depth, head_rng));
                    break;
                }
                case TaskType::cls:
                    cls_heads_.emplace(t.task_id,
                                       nn::ClsHeadT<float>(cfg_.encoder.embed_dim,
                                                           t.num_classes, head_rng));
                    break;
                case TaskType::reg:
                    reg_heads_.emplace(t.task_id,
                                       nn::RegHeadT<float>(cfg_.encoder.embed_dim, head_rng));
                    break;
                case TaskType::det:
                    det_heads_.emplace(t.task_id,
                                       nn::DetHeadT<float>(cfg_.encoder.embed_dim,
                                                           cfg_.det_channels, head_rng));
                    break;
            }
        }
        collect_params();
    }

    const ModelConfig& config() const { return cfg_; }
    const std::vector<TaskSpec>& tasks() const { return tasks_; }
    nn::VitEncoderT<float>& encoder() { return *encoder_; }
    const nn::VitEncoderT<float>& encoder() const { return *encoder_; }
    std::vector<TaggedParam>& params() { return params_; }

    int count_params_with_prefix(const std::string& prefix) const {
        int c = 0;
        for (const auto& p : params_)
            if (p.name.rfind(prefix, 0) == 0) ++c;
        return c;
    }

    const TaskSpec& task(const std::string& task_id) const {
        auto it = by_id_.find(task_id);
        if (it == by_id_.end())
            throw ValidationError("task '" + task_id + "' is not part of this model");
        return *it->second;
    }

    // Training-graph loss of one sample (batch reduction is the caller's).
    Var sample_loss(const LabeledSample& sample, const std::string& task_id) const {
        const TaskSpec& spec = task(task_id);
        switch (spec.type) {
            case TaskType::seg: {
                auto logits = seg_logits(sample.image, task_id);
                return loss::dice_loss(channel_softmax(logits), sample.mask);
            }
            case TaskType::cls: {
                auto out = encoder_->encode(to_f(sample.image), task_id);
                auto logits = cls_heads_.at(task_id).forward(patch_tokens(out));
                return loss::cross_entropy_loss(logits, sample.class_id);
            }
            case TaskType::reg: {
                auto out = encoder_->encode(to_f(sample.image), task_id);
                auto pred = reg_heads_.at(task_id).forward(patch_tokens(out));
                return loss::l1_loss(pred, sample.reg_target);
            }
            case TaskType::det: {
                auto out = encoder_->encode(to_f(sample.image), task_id);
                auto det = det_heads_.at(task_id).forward(out.fmap);
                int g = cfg_.encoder.grid();
                auto target = detect_encode(sample.box.clamped(), g, g);
                return loss::detection_loss(det.heatmap, det.box_params, target);
            }
        }
        throw Error("unreachable task type");
    }

    // ---- inference (no autograd graph) ----

    TensorT<int> predict_mask(const Tensor& image, const std::string& task_id) const {
        NoGradGuard ng;
        auto logits = seg_logits(image, task_id).value();
        int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
        TensorT<int> mask({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int best = 0;
                for (int k = 1; k < c; ++k)
                    if (logits.at3(k, y, x) > logits.at3(best, y, x)) best = k;
                mask.at2(y, x) = best;
            }
        return mask;
    }

    std::vector<double> predict_class_probs(const Tensor& image,
                                            const std::string& task_id) const {
        NoGradGuard ng;
        auto out = encoder_->encode(to_f(image), task_id);
        auto logits = cls_heads_.at(task_id).forward(patch_tokens(out));
        int c = static_cast<int>(logits.value().numel());
        auto sm = ops::softmax_rows(ops::reshape(logits, {1, c}));
        std::vector<double> probs(static_cast<size_t>(c));
        for (int i = 0; i < c; ++i) probs[static_cast<size_t>(i)] = sm.value().at2(0, i);
        return probs;
    }

    double predict_scalar(const Tensor& image, const std::string& task_id) const {
        NoGradGuard ng;
        auto out = encoder_->encode(to_f(image), task_id);
        return reg_heads_.at(task_id).forward(patch_tokens(out)).value().at(0);
    }

    BoundingBox predict_box(const Tensor& image, const std::string& task_id) const {
        NoGradGuard ng;
        auto out = encoder_->encode(to_f(image), task_id);
        const auto& head = det_heads_.at(task_id);
        return detect_decode(head.to_grid(head.forward(out.fmap)));
    }

  private:
    static const Tensor& to_f(const Tensor& t) { return t; }

    static Var patch_tokens(const nn::EncodeOutT<float>& out) {
        int n = out.tokens.value().rows() - 1;
        return ops::slice_rows(out.tokens, 1, n);
    }

    Var seg_logits(const Tensor& image, const std::string& task_id) const {
        auto out = encoder_->encode(image, task_id, cfg_.seg.tap_layers);
        return seg_heads_.at(task_id).forward(out.taps, cfg_.encoder.grid(),
                                              cfg_.encoder.image_size,
                                              cfg_.encoder.image_size);
    }

    static Var channel_softmax(Var logits) {
        int c = logits.value().dim(0);
        int hw = logits.value().dim(1) * logits.value().dim(2);
        auto rows = ops::softmax_rows(ops::transpose2d(ops::reshape(logits, {c, hw})));
        return ops::reshape(ops::transpose2d(rows),
                            {c, logits.value().dim(1), logits.value().dim(2)});
    }

    void collect_params() {
        nn::ParamList<float> enc;
        encoder_->collect_params(enc);
        for (auto& p : enc) {
            ParamGroup g = ParamGroup::backbone;
            if (p.name.rfind("moe.", 0) == 0 || p.name.rfind("task_embed.", 0) == 0)
                g = ParamGroup::moe;
            params_.push_back({p.name, p.var, g});
        }
        for (const auto& t : tasks_) {
            nn::ParamList<float> head;
            std::string prefix = "head." + t.task_id;
            switch (t.type) {
                case TaskType::seg: seg_heads_.at(t.task_id).collect(prefix, head); break;
                case TaskType::cls: cls_heads_.at(t.task_id).collect(prefix, head); break;
                case TaskType::reg: reg_heads_.at(t.task_id).collect(prefix, head); break;
                case TaskType::det: det_heads_.at(t.task_id).collect(prefix, head); break;
            }
            ParamGroup g =
                t.type == TaskType::seg ? ParamGroup::seg_head : ParamGroup::task_head;
            for (auto& p : head) params_.push_back({p.name, p.var, g});
        }
    }

    ModelConfig cfg_;
    std::vector<TaskSpec> tasks_;
    std::map<std::string, const TaskSpec*> by_id_;
    std::unique_ptr<nn::VitEncoderT<float>> encoder_;
    std::map<std::string, nn::DptSegHeadT<float>> seg_heads_;
    std::map<std::string, nn::ClsHeadT<float>> cls_heads_;
    std::map<std::string, nn::RegHeadT<float>> reg_heads_;
    std::map<std::string, nn::DetHeadT<float>> det_heads_;
    std::vector<TaggedParam> params_;
};

}  // namespace usmt

#endif

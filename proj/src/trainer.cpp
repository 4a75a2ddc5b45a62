#include "usmt/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "usmt/trainer/optimizer.hpp"

namespace usmt {

namespace fs = std::filesystem;

UnitData load_unit_data(const TrainingUnit& unit, const TaskRegistry& registry,
                        int target_size, double val_fraction, uint64_t seed) {
    UnitData data;
    PreprocessConfig pp;
    pp.target_size = target_size;
    for (const auto& task_id : unit.task_ids) {
        const TaskSpec* spec = registry.find(task_id);
        if (!spec) throw ValidationError("unit task '" + task_id + "' not in registry");
        auto ds = load_task_dataset(*spec, registry.base_dir, pp);
        if (ds.train.empty())
            throw ValidationError("task '" + task_id + "' has no loadable training samples");
        auto [train, val] = split_train_val(static_cast<int>(ds.train.size()), val_fraction,
                                            mix_seed(seed, "split/" + task_id));
        data.train_idx[task_id] = std::move(train);
        data.val_idx[task_id] = std::move(val);
        data.datasets.emplace(task_id, std::move(ds));
    }
    return data;
}

namespace {

struct TaskEval {
    double primary = 0;
    std::string metric;
    bool flagged = false;
    int n = 0;
};

TaskEval eval_primary(const MultiTaskModel& model, const TaskDataset& ds,
                      const std::vector<const LabeledSample*>& samples,
                      const std::string& task_id) {
    TaskEval out;
    out.n = static_cast<int>(samples.size());
    if (samples.empty()) throw ValidationError("validation set for '" + task_id + "' is empty");
    switch (ds.spec.type) {
        case TaskType::seg: {
            double acc = 0;
            for (const auto* s : samples) {
                auto pred = model.predict_mask(s->image, task_id);
                TensorT<int> pred_fg(pred.shape), gt_fg(s->mask.shape);
                for (int64_t i = 0; i < pred.numel(); ++i) pred_fg.at(i) = pred.at(i) > 0;
                for (int64_t i = 0; i < s->mask.numel(); ++i) gt_fg.at(i) = s->mask.at(i) > 0;
                acc += metrics::dsc(pred_fg, gt_fg);
            }
            out.primary = acc / out.n;
            out.metric = "DSC";
            break;
        }
        case TaskType::cls: {
            std::vector<std::vector<double>> probs;
            std::vector<int> gt;
            for (const auto* s : samples) {
                probs.push_back(model.predict_class_probs(s->image, task_id));
                gt.push_back(s->class_id);
            }
            try {
                out.primary = metrics::roc_auc(probs, gt);
                out.metric = "AUC";
            } catch (const ValidationError&) {
                // single-class validation split: fall back to accuracy
                std::vector<int> pred;
                for (const auto& p : probs)
                    pred.push_back(static_cast<int>(
                        std::max_element(p.begin(), p.end()) - p.begin()));
                out.primary = metrics::accuracy(pred, gt);
                out.metric = "ACC";
                out.flagged = true;
            }
            break;
        }
        case TaskType::reg: {
            std::vector<double> preds, gts, scales;
            for (const auto* s : samples) {
                preds.push_back(model.predict_scalar(s->image, task_id));
                gts.push_back(s->reg_original);
                scales.push_back(s->scale);
            }
            out.primary = metrics::mre(preds, gts, scales);
            out.metric = "MRE";
            break;
        }
        case TaskType::det: {
            double acc = 0;
            for (const auto* s : samples)
                acc += metrics::box_iou(model.predict_box(s->image, task_id), s->box);
            out.primary = acc / out.n;
            out.metric = "IoU";
            break;
        }
    }
    return out;
}

std::vector<const LabeledSample*> select_samples(const TaskDataset& ds,
                                                 const std::vector<int>& idx) {
    std::vector<const LabeledSample*> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(&ds.train[static_cast<size_t>(i)]);
    return out;
}

}  // namespace

ValidationResult validate_unit(const MultiTaskModel& model, const UnitData& data,
                               const std::map<std::string, double>& mre_baselines) {
    ValidationResult res;
    double acc = 0;
    int count = 0;
    for (const auto& [task_id, ds] : data.datasets) {
        auto samples = select_samples(ds, data.val_idx.at(task_id));
        auto ev = eval_primary(model, ds, samples, task_id);
        metrics::MetricEntry entry;
        entry.task_id = task_id;
        entry.metric = ev.metric;
        entry.value = ev.primary;
        entry.direction = metrics::metric_direction(ev.metric);
        entry.n_samples = ev.n;
        entry.convention_flag = ev.flagged;
        res.report.entries.push_back(entry);
        double normalized;
        if (entry.direction == metrics::Direction::higher_better) {
            normalized = ev.primary;
        } else {
            auto it = mre_baselines.find(task_id);
            double base = it != mre_baselines.end() ? it->second : ev.primary;
            normalized = -ev.primary / std::max(base, 1e-12);
            res.mre_values[task_id] = ev.primary;
        }
        acc += normalized;
        ++count;
    }
    res.selection_score = acc / count;
    return res;
}

metrics::MetricReport evaluate_model(const MultiTaskModel& model, const UnitData& data,
                                     const std::string& split) {
    if (split != "train" && split != "val" && split != "test")
        throw ValidationError("split must be train|val|test, got '" + split + "'");
    metrics::MetricReport report;
    for (const auto& [task_id, ds] : data.datasets) {
        std::vector<const LabeledSample*> samples;
        if (split == "train")
            samples = select_samples(ds, data.train_idx.at(task_id));
        else if (split == "val")
            samples = select_samples(ds, data.val_idx.at(task_id));
        else
            for (const auto& s : ds.test) samples.push_back(&s);
        if (samples.empty())
            throw ValidationError("task '" + task_id + "' has no samples in split '" +
                                  split + "'");
        int n = static_cast<int>(samples.size());
        auto push = [&](const std::string& metric, double value, bool flag = false) {
            metrics::MetricEntry e;
            e.task_id = task_id;
            e.metric = metric;
            e.value = value;
            e.direction = metrics::metric_direction(metric);
            e.n_samples = n;
            e.convention_flag = flag;
            report.entries.push_back(e);
        };
        switch (ds.spec.type) {
            case TaskType::seg: {
                double d = 0, h = 0;
                bool flagged = false;
                for (const auto* s : samples) {
                    auto pred = model.predict_mask(s->image, task_id);
                    TensorT<int> pred_fg(pred.shape), gt_fg(s->mask.shape);
                    for (int64_t i = 0; i < pred.numel(); ++i)
                        pred_fg.at(i) = pred.at(i) > 0;
                    for (int64_t i = 0; i < s->mask.numel(); ++i)
                        gt_fg.at(i) = s->mask.at(i) > 0;
                    d += metrics::dsc(pred_fg, gt_fg);
                    auto hd = metrics::hausdorff(pred_fg, gt_fg);
                    h += hd.value;
                    flagged = flagged || hd.empty_convention;
                }
                push("DSC", d / n);
                push("HD", h / n, flagged);
                break;
            }
            case TaskType::cls: {
                std::vector<std::vector<double>> probs;
                std::vector<int> gt, pred;
                for (const auto* s : samples) {
                    probs.push_back(model.predict_class_probs(s->image, task_id));
                    gt.push_back(s->class_id);
                    pred.push_back(static_cast<int>(
                        std::max_element(probs.back().begin(), probs.back().end()) -
                        probs.back().begin()));
                }
                try {
                    push("AUC", metrics::roc_auc(probs, gt));
                } catch (const ValidationError&) {
                    push("ACC", metrics::accuracy(pred, gt), true);
                }
                auto fm = metrics::f1_and_mcc(pred, gt);
                push("F1", fm.f1);
                push("MCC", fm.mcc);
                break;
            }
            case TaskType::reg: {
                std::vector<double> preds, gts, scales;
                for (const auto* s : samples) {
                    preds.push_back(model.predict_scalar(s->image, task_id));
                    gts.push_back(s->reg_original);
                    scales.push_back(s->scale);
                }
                push("MRE", metrics::mre(preds, gts, scales));
                break;
            }
            case TaskType::det: {
                double acc = 0;
                for (const auto* s : samples)
                    acc += metrics::box_iou(model.predict_box(s->image, task_id), s->box);
                push("IoU", acc / n);
                break;
            }
        }
    }
    return report;
}

TrainUnitResult train_unit(const TrainingUnit& unit, const TaskRegistry& registry,
                           const ModelConfig& model_cfg, const OptimizerConfig& optim_cfg,
                           const LossWeights& weights, Paradigm paradigm, uint64_t seed,
                           const std::string& out_dir, bool verbose) {
    model_cfg.validate();
    optim_cfg.validate();
    UnitData data = load_unit_data(unit, registry, model_cfg.encoder.image_size,
                                   optim_cfg.val_fraction, seed);
    std::vector<TaskSpec> specs;
    for (const auto& task_id : unit.task_ids) specs.push_back(*registry.find(task_id));

    MultiTaskModel model(model_cfg, specs, unit.moe_enabled, mix_seed(seed, unit.unit_id));
    AdamW optimizer(model.params(), optim_cfg);

    // epoch-0 validation defines the MRE normalization baselines
    auto baseline = validate_unit(model, data, {});
    std::map<std::string, double> mre_baselines = baseline.mre_values;

    std::map<std::string, int> sizes;
    for (const auto& [task_id, idx] : data.train_idx)
        sizes[task_id] = static_cast<int>(idx.size());

    std::vector<std::string> task_order = unit.task_ids;
    std::sort(task_order.begin(), task_order.end());

    fs::create_directories(out_dir);
    std::ofstream log(fs::path(out_dir) / "log.csv");
    if (!log) throw IoError("cannot write " + out_dir + "/log.csv");
    log << "epoch";
    for (const auto& t : task_order) log << ",train_loss_" << t;
    for (const auto& t : task_order) log << ",val_" << t;
    log << ",selection_score\n";

    double best_score = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    std::vector<Tensor> best_weights;
    metrics::MetricReport best_report;

    for (int epoch = 1; epoch <= optim_cfg.epochs; ++epoch) {
        auto batches = sample_batches(sizes, optim_cfg.batch_size, epoch, seed);
        std::map<std::string, double> loss_sum;
        std::map<std::string, int> loss_count;
        for (size_t b = 0; b < batches.size(); ++b) {
            const auto& batch = batches[b];
            const auto& ds = data.datasets.at(batch.task_id);
            const auto& train_idx = data.train_idx.at(batch.task_id);
            double lw = weights.weight(batch.task_id);
            float inv_b = 1.0f / static_cast<float>(batch.sample_indices.size());
            optimizer.zero_grad();
            for (size_t si = 0; si < batch.sample_indices.size(); ++si) {
                int idx = train_idx[static_cast<size_t>(batch.sample_indices[si])];
                const LabeledSample* sample = &ds.train[static_cast<size_t>(idx)];
                LabeledSample augmented;
                if (optim_cfg.augment) {
                    augmented = *sample;
                    Rng aug_rng(mix_seed(seed, "aug/" + std::to_string(epoch) + "/" +
                                                   batch.task_id + "/" + std::to_string(b) +
                                                   "/" + std::to_string(si)));
                    augment_sample(augmented, ds.spec.type, aug_rng);
                    sample = &augmented;
                }
                auto l = model.sample_loss(*sample, batch.task_id);
                double lv = l.value().item();
                if (!std::isfinite(lv))
                    throw NumericError("non-finite loss (epoch " + std::to_string(epoch) +
                                       ", task '" + batch.task_id + "', batch " +
                                       std::to_string(b) + ")");
                loss_sum[batch.task_id] += lv;
                loss_count[batch.task_id] += 1;
                ops::scale(l, static_cast<float>(lw) * inv_b).backward();
            }
            optimizer.step();
        }

        auto val = validate_unit(model, data, mre_baselines);
        log << epoch;
        log.precision(10);
        for (const auto& t : task_order) {
            log << ",";
            if (loss_count.count(t)) log << loss_sum[t] / loss_count[t];
        }
        for (const auto& t : task_order) {
            log << ",";
            for (const auto& e : val.report.entries)
                if (e.task_id == t) log << e.value;
        }
        log << "," << val.selection_score << "\n";
        if (verbose) {
            std::cout << "[" << unit.unit_id << "] epoch " << epoch
                      << " selection_score=" << val.selection_score << "\n";
        }

        if (val.selection_score > best_score) {
            best_score = val.selection_score;
            best_epoch = epoch;
            best_weights.clear();
            for (auto& p : model.params()) best_weights.push_back(p.var.value());
            best_report = val.report;
        }
    }

    // restore the best epoch's parameters before writing the checkpoint
    if (best_epoch > 0)
        for (size_t i = 0; i < model.params().size(); ++i)
            model.params()[i].var.mutable_value() = best_weights[i];

    CheckpointMeta meta;
    meta.paradigm = paradigm_name(paradigm);
    meta.unit_id = unit.unit_id;
    meta.moe_enabled = unit.moe_enabled;
    meta.seed = seed;
    meta.config_hash = config_hash(model_cfg, optim_cfg);
    meta.best_score = best_score;
    meta.best_epoch = best_epoch;
    meta.mre_baselines = mre_baselines;
    meta.model = model_cfg;
    meta.optim = optim_cfg;
    meta.tasks = specs;
    meta.data_base_dir = registry.base_dir;
    save_checkpoint(out_dir, model, meta);

    TrainUnitResult result;
    result.checkpoint_dir = out_dir;
    result.best_score = best_score;
    result.best_epoch = best_epoch;
    return result;
}

}  // namespace usmt

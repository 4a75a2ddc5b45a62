#ifndef USMT_OBJECTIVES_LOSSES_HPP
#define USMT_OBJECTIVES_LOSSES_HPP

#include <map>
#include <string>
#include <vector>

#include "usmt/core/ops.hpp"
#include "usmt/heads/boxes.hpp"

namespace usmt {

// Per-task balancing coefficients; defaults to 1 for unlisted tasks.
struct LossWeights {
    std::map<std::string, double> lambda;

    double weight(const std::string& task_id) const {
        auto it = lambda.find(task_id);
        double w = it == lambda.end() ? 1.0 : it->second;
        if (w < 0) throw ConfigError("negative loss weight for task '" + task_id + "'");
        return w;
    }
};

namespace loss {

// Soft Dice over foreground classes. probs: {C, H, W} per-pixel class
// probabilities, gt: {H, W} class ids.
template <class S>
VarT<S> dice_loss(VarT<S> probs, const TensorT<int>& gt, S eps = S(1e-6)) {
    const auto& pv = probs.value();
    if (pv.ndim() != 3 || gt.ndim() != 2 || pv.dim(1) != gt.dim(0) || pv.dim(2) != gt.dim(1))
        throw ShapeError("dice_loss: probs " + pv.shape_str() + " vs gt " + gt.shape_str());
    int c = pv.dim(0);
    if (c < 2) throw ConfigError("dice_loss needs at least 2 classes (background + 1)");
    int64_t hw = static_cast<int64_t>(pv.dim(1)) * pv.dim(2);
    for (int v : gt.data)
        if (v < 0 || v >= c)
            throw ValidationError("dice_loss: mask id " + std::to_string(v) +
                                  " out of range [0," + std::to_string(c) + ")");

    auto flat = ops::reshape(probs, {c, static_cast<int>(hw)});
    VarT<S> dice_sum;
    for (int cls = 1; cls < c; ++cls) {
        TensorT<S> y({1, static_cast<int>(hw)});
        double y_sum = 0.0;
        for (int64_t i = 0; i < hw; ++i)
            if (gt.at(i) == cls) {
                y.at(i) = S(1);
                y_sum += 1.0;
            }
        auto p_c = ops::slice_rows(flat, cls, 1);
        auto inter = ops::sum_all(ops::mul(p_c, VarT<S>::constant(std::move(y))));
        auto num = ops::add_const(ops::scale(inter, S(2)), eps);
        auto den = ops::add_const(ops::sum_all(p_c), static_cast<S>(y_sum) + eps);
        auto dice = ops::div(num, den);
        dice_sum = dice_sum.defined() ? ops::add(dice_sum, dice) : dice;
    }
    auto mean_dice = ops::scale(dice_sum, S(1) / static_cast<S>(c - 1));
    return ops::add_const(ops::scale(mean_dice, S(-1)), S(1));
}

// Negative log softmax probability of the true class. logits: {C} or (1 x C).
template <class S>
VarT<S> cross_entropy_loss(VarT<S> logits, int gt_class) {
    int c = static_cast<int>(logits.value().numel());
    if (c < 2) throw ConfigError("cross_entropy_loss needs >= 2 classes");
    if (gt_class < 0 || gt_class >= c)
        throw ValidationError("cross_entropy_loss: class " + std::to_string(gt_class) +
                              " out of range [0," + std::to_string(c) + ")");
    auto row = ops::reshape(logits, {1, c});
    return ops::scale(ops::pick(ops::log_softmax_rows(row), 0, gt_class), S(-1));
}

template <class S>
VarT<S> l1_loss(VarT<S> pred, double gt) {
    if (pred.value().numel() != 1)
        throw ShapeError("l1_loss expects a scalar prediction, got " +
                         pred.value().shape_str());
    if (!pred.value().all_finite() || !std::isfinite(gt))
        throw NumericError("l1_loss: non-finite input");
    auto flat = ops::reshape(pred, {1});
    return ops::reshape(ops::abs(ops::add_const(flat, static_cast<S>(-gt))), {1});
}

// Focal heatmap term over all cells plus Smooth L1 on the four box channels
// at the ground-truth center cell.
template <class S>
VarT<S> detection_loss(VarT<S> heatmap, VarT<S> box_params, const DetectionTarget& target) {
    const auto& hv = heatmap.value();
    if (hv.ndim() != 2 || hv.shape != std::vector<int>{target.heatmap.dim(0),
                                                       target.heatmap.dim(1)})
        throw ShapeError("detection_loss: heatmap " + hv.shape_str() + " vs target " +
                         target.heatmap.shape_str());
    if (box_params.value().ndim() != 3 || box_params.value().dim(0) != 4 ||
        box_params.value().dim(1) != hv.dim(0) || box_params.value().dim(2) != hv.dim(1))
        throw ShapeError("detection_loss: box params " + box_params.value().shape_str());
    if (target.cell_y < 0 || target.cell_y >= hv.dim(0) || target.cell_x < 0 ||
        target.cell_x >= hv.dim(1))
        throw ValidationError("detection_loss: target cell outside the grid");

    auto focal = ops::focal_heatmap(heatmap, target.heatmap.template cast<S>());
    TensorT<S> reg_target =
        TensorT<double>::from({4}, {target.dx, target.dy, target.bw, target.bh})
            .template cast<S>();
    auto reg = ops::smooth_l1(ops::pick_channels(box_params, target.cell_y, target.cell_x),
                              reg_target, S(1));
    return ops::add(focal, reg);
}

// L = sum_t lambda_t L_t
inline double multi_task_loss(const std::map<std::string, double>& per_task_losses,
                              const LossWeights& weights) {
    if (per_task_losses.empty())
        throw ValidationError("multi_task_loss: empty task set has no objective");
    double acc = 0.0;
    for (const auto& [task, l] : per_task_losses) acc += weights.weight(task) * l;
    return acc;
}

template <class S>
VarT<S> multi_task_loss(const std::map<std::string, VarT<S>>& per_task_losses,
                        const LossWeights& weights) {
    if (per_task_losses.empty())
        throw ValidationError("multi_task_loss: empty task set has no objective");
    VarT<S> acc;
    for (const auto& [task, l] : per_task_losses) {
        auto scaled = ops::scale(l, static_cast<S>(weights.weight(task)));
        acc = acc.defined() ? ops::add(acc, scaled) : scaled;
    }
    return acc;
}

}  // namespace loss
}  // namespace usmt

#endif

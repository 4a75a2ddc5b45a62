#include "usmt/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

namespace usmt {
namespace metrics {

using nlohmann::json;

Direction metric_direction(const std::string& metric_name) {
    if (metric_name == "MRE" || metric_name == "HD" || metric_name == "HD95")
        return Direction::lower_better;
    return Direction::higher_better;
}

const MetricEntry* MetricReport::find(const std::string& task_id,
                                      const std::string& metric) const {
    for (const auto& e : entries)
        if (e.task_id == task_id && e.metric == metric) return &e;
    return nullptr;
}

std::string MetricReport::to_json() const {
    json j;
    j["meta"] = {{"paradigm", paradigm}, {"seed", seed}, {"checkpoint", checkpoint}};
    j["results"] = json::array();
    for (const auto& e : entries) {
        json r = {{"task_id", e.task_id},
                  {"metric", e.metric},
                  {"value", e.value},
                  {"direction", direction_name(e.direction)},
                  {"n", e.n_samples}};
        if (e.convention_flag) r["flagged"] = true;
        j["results"].push_back(std::move(r));
    }
    return j.dump(2);
}

MetricReport MetricReport::from_json(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ValidationError("metric report: malformed JSON");
    MetricReport r;
    try {
        r.paradigm = j.at("meta").at("paradigm").get<std::string>();
        r.seed = j.at("meta").at("seed").get<uint64_t>();
        r.checkpoint = j.at("meta").at("checkpoint").get<std::string>();
        for (const auto& e : j.at("results")) {
            MetricEntry m;
            m.task_id = e.at("task_id").get<std::string>();
            m.metric = e.at("metric").get<std::string>();
            m.value = e.at("value").get<double>();
            std::string dir = e.at("direction").get<std::string>();
            if (dir != "higher_better" && dir != "lower_better")
                throw ValidationError("metric report: bad direction '" + dir + "'");
            m.direction =
                dir == "higher_better" ? Direction::higher_better : Direction::lower_better;
            m.n_samples = e.at("n").get<int>();
            m.convention_flag = e.value("flagged", false);
            r.entries.push_back(std::move(m));
        }
    } catch (const json::exception& ex) {
        throw ValidationError(std::string("metric report: ") + ex.what());
    }
    return r;
}

void MetricReport::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << to_json() << "\n";
}

MetricReport MetricReport::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

namespace {

void check_mask_shapes(const TensorT<int>& a, const TensorT<int>& b, const char* what) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.shape != b.shape)
        throw ShapeError(std::string(what) + ": masks " + a.shape_str() + " vs " +
                         b.shape_str());
}

// 4-connectivity boundary: foreground pixels with a background or
// out-of-image neighbor.
std::vector<std::pair<int, int>> boundary_pixels(const TensorT<int>& mask) {
    int h = mask.dim(0), w = mask.dim(1);
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (mask.at2(y, x) == 0) continue;
            bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1 ||
                        mask.at2(y - 1, x) == 0 || mask.at2(y + 1, x) == 0 ||
                        mask.at2(y, x - 1) == 0 || mask.at2(y, x + 1) == 0;
            if (edge) out.emplace_back(y, x);
        }
    return out;
}

// directed distances from each point of `from` to the nearest point of `to`
std::vector<double> directed_distances(const std::vector<std::pair<int, int>>& from,
                                       const std::vector<std::pair<int, int>>& to) {
    std::vector<double> out;
    out.reserve(from.size());
    for (const auto& [ay, ax] : from) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& [by, bx] : to) {
            double d2 = double(ay - by) * (ay - by) + double(ax - bx) * (ax - bx);
            if (d2 < best) best = d2;
        }
        out.push_back(std::sqrt(best));
    }
    return out;
}

}  // namespace

double dsc(const TensorT<int>& pred, const TensorT<int>& gt) {
    check_mask_shapes(pred, gt, "dsc");
    int64_t inter = 0, a = 0, b = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        bool p = pred.at(i) != 0, g = gt.at(i) != 0;
        a += p;
        b += g;
        inter += p && g;
    }
    if (a + b == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

HausdorffResult hausdorff(const TensorT<int>& pred, const TensorT<int>& gt,
                          double percentile) {
    check_mask_shapes(pred, gt, "hausdorff");
    if (percentile <= 0.0 || percentile > 1.0)
        throw ConfigError("hausdorff percentile must be in (0, 1]");
    auto bp = boundary_pixels(pred);
    auto bg = boundary_pixels(gt);
    HausdorffResult res;
    if (bp.empty() && bg.empty()) return res;  // both empty -> 0
    if (bp.empty() || bg.empty()) {
        int h = pred.dim(0), w = pred.dim(1);
        res.value = std::sqrt(double(h - 1) * (h - 1) + double(w - 1) * (w - 1));
        res.empty_convention = true;
        return res;
    }
    auto d1 = directed_distances(bp, bg);
    auto d2 = directed_distances(bg, bp);
    if (percentile >= 1.0) {
        res.value = std::max(*std::max_element(d1.begin(), d1.end()),
                             *std::max_element(d2.begin(), d2.end()));
    } else {
        auto kth = [percentile](std::vector<double>& d) {
            std::sort(d.begin(), d.end());
            size_t k = static_cast<size_t>(std::ceil(percentile * d.size())) - 1;
            return d[std::min(k, d.size() - 1)];
        };
        res.value = std::max(kth(d1), kth(d2));
    }
    return res;
}

namespace {

// binary AUC from a positive-class score column, rank-based with average
// ranks over tie groups
double auc_binary(const std::vector<double>& scores, const std::vector<char>& is_pos) {
    size_t n = scores.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    int64_t n_pos = 0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (size_t k = i; k < j; ++k)
            if (is_pos[idx[k]]) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        i = j;
    }
    int64_t n_neg = static_cast<int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("roc_auc: gt contains a single class, AUC is undefined");
    return (rank_sum_pos - 0.5 * n_pos * (n_pos + 1)) /
           (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double roc_auc(const std::vector<std::vector<double>>& scores, const std::vector<int>& gt) {
    if (scores.size() != gt.size() || scores.empty())
        throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " score rows vs " +
                         std::to_string(gt.size()) + " labels");
    size_t c = scores[0].size();
    if (c < 2) throw ShapeError("roc_auc: score rows need >= 2 class columns");
    for (const auto& row : scores)
        if (row.size() != c) throw ShapeError("roc_auc: ragged score rows");
    std::set<int> present(gt.begin(), gt.end());
    if (present.size() < 2)
        throw ValidationError("roc_auc: gt contains a single class, AUC is undefined");
    for (int cls : present)
        if (cls < 0 || cls >= static_cast<int>(c))
            throw ValidationError("roc_auc: class " + std::to_string(cls) +
                                  " outside score columns");

    if (c == 2) {
        std::vector<double> col(scores.size());
        std::vector<char> pos(scores.size());
        for (size_t i = 0; i < scores.size(); ++i) {
            col[i] = scores[i][1];
            pos[i] = gt[i] == 1;
        }
        return auc_binary(col, pos);
    }
    double acc = 0.0;
    for (int cls : present) {
        std::vector<double> col(scores.size());
        std::vector<char> pos(scores.size());
        for (size_t i = 0; i < scores.size(); ++i) {
            col[i] = scores[i][static_cast<size_t>(cls)];
            pos[i] = gt[i] == cls;
        }
        acc += auc_binary(col, pos);
    }
    return acc / static_cast<double>(present.size());
}

F1Mcc f1_and_mcc(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeError("f1_and_mcc: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gt.size()) + " labels");
    std::set<int> classes(pred.begin(), pred.end());
    classes.insert(gt.begin(), gt.end());
    const auto n = static_cast<double>(gt.size());

    double f1_sum = 0.0;
    for (int cls : classes) {
        int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < gt.size(); ++i) {
            if (pred[i] == cls && gt[i] == cls) ++tp;
            if (pred[i] == cls && gt[i] != cls) ++fp;
            if (pred[i] != cls && gt[i] == cls) ++fn;
        }
        double denom = 2.0 * tp + fp + fn;
        f1_sum += denom > 0 ? 2.0 * tp / denom : 0.0;
    }

    // multiclass MCC from confusion counts
    std::map<int, double> pred_count, gt_count;
    double correct = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        pred_count[pred[i]] += 1;
        gt_count[gt[i]] += 1;
        if (pred[i] == gt[i]) ++correct;
    }
    double dot = 0, p2 = 0, t2 = 0;
    for (int cls : classes) {
        dot += pred_count[cls] * gt_count[cls];
        p2 += pred_count[cls] * pred_count[cls];
        t2 += gt_count[cls] * gt_count[cls];
    }
    double denom = std::sqrt(n * n - p2) * std::sqrt(n * n - t2);
    F1Mcc out;
    out.f1 = f1_sum / static_cast<double>(classes.size());
    out.mcc = denom > 0 ? (correct * n - dot) / denom : 0.0;
    return out;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
    auto ca = a.clamped(), cb = b.clamped();
    double ax0 = ca.cx - ca.bw / 2, ax1 = ca.cx + ca.bw / 2;
    double ay0 = ca.cy - ca.bh / 2, ay1 = ca.cy + ca.bh / 2;
    double bx0 = cb.cx - cb.bw / 2, bx1 = cb.cx + cb.bw / 2;
    double by0 = cb.cy - cb.bh / 2, by1 = cb.cy + cb.bh / 2;
    double ix = std::max(0.0, std::min(ax1, bx1) - std::max(ax0, bx0));
    double iy = std::max(0.0, std::min(ay1, by1) - std::max(ay0, by0));
    double inter = ix * iy;
    double uni = ca.bw * ca.bh + cb.bw * cb.bh - inter;
    if (uni <= 0.0) return ca.cx == cb.cx && ca.cy == cb.cy ? 1.0 : 0.0;
    return inter / uni;
}

double mre(const std::vector<double>& preds_resized, const std::vector<double>& gts_original,
           const std::vector<double>& scales) {
    if (preds_resized.size() != gts_original.size() ||
        preds_resized.size() != scales.size() || preds_resized.empty())
        throw ShapeError("mre: prediction/gt/scale lengths differ or are empty");
    double acc = 0.0;
    for (size_t i = 0; i < preds_resized.size(); ++i) {
        if (scales[i] <= 0.0)
            throw ValidationError("mre: scale factor must be positive, got " +
                                  std::to_string(scales[i]));
        acc += std::abs(preds_resized[i] * scales[i] - gts_original[i]);
    }
    return acc / static_cast<double>(preds_resized.size());
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& gt) {
    if (pred.size() != gt.size() || pred.empty())
        throw ShapeError("accuracy: length mismatch");
    int64_t c = 0;
    for (size_t i = 0; i < gt.size(); ++i) c += pred[i] == gt[i];
    return static_cast<double>(c) / static_cast<double>(gt.size());
}

}  // namespace metrics
}  // namespace usmt

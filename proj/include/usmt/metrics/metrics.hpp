#ifndef USMT_METRICS_METRICS_HPP
#define USMT_METRICS_METRICS_HPP

#include <string>
#include <vector>

#include "usmt/core/tensor.hpp"
#include "usmt/heads/boxes.hpp"

namespace usmt {
namespace metrics {

enum class Direction { higher_better, lower_better };

inline const char* direction_name(Direction d) {
    return d == Direction::higher_better ? "higher_better" : "lower_better";
}

// MRE and HD improve downward, everything else upward.
Direction metric_direction(const std::string& metric_name);

struct MetricEntry {
    std::string task_id;
    std::string metric;
    double value = 0;
    Direction direction = Direction::higher_better;
    int n_samples = 0;
    bool convention_flag = false;  // an empty-mask or fallback convention fired
};

struct MetricReport {
    std::string paradigm;
    uint64_t seed = 0;
    std::string checkpoint;
    std::vector<MetricEntry> entries;

    const MetricEntry* find(const std::string& task_id, const std::string& metric) const;
    std::string to_json() const;
    static MetricReport from_json(const std::string& text);
    void save(const std::string& path) const;
    static MetricReport load(const std::string& path);
};

// Binary masks are {H, W} int tensors; nonzero pixels are foreground.

// 2|A n B| / (|A| + |B|); both masks empty -> 1.
double dsc(const TensorT<int>& pred, const TensorT<int>& gt);

struct HausdorffResult {
    double value = 0;
    bool empty_convention = false;  // one mask empty: value is the image diagonal
};

// Max of directed Hausdorff distances between 4-connectivity boundary pixel
// sets, in pixel units. `percentile` < 1 computes the HD-percentile variant.
HausdorffResult hausdorff(const TensorT<int>& pred, const TensorT<int>& gt,
                          double percentile = 1.0);

// Mann-Whitney AUC with half-credit for ties; multiclass is the macro
// one-vs-rest average over classes present in gt. scores: n rows of C class
// probabilities.
double roc_auc(const std::vector<std::vector<double>>& scores, const std::vector<int>& gt);

struct F1Mcc {
    double f1 = 0;
    double mcc = 0;
};

// Macro F1 plus the multiclass Matthews correlation coefficient; degenerate
// denominators give 0 by convention.
F1Mcc f1_and_mcc(const std::vector<int>& pred, const std::vector<int>& gt);

double box_iou(const BoundingBox& a, const BoundingBox& b);

// Mean absolute error in original-resolution pixels: mean |pred*scale - gt|.
double mre(const std::vector<double>& preds_resized, const std::vector<double>& gts_original,
           const std::vector<double>& scales);

double accuracy(const std::vector<int>& pred, const std::vector<int>& gt);

}  // namespace metrics
}  // namespace usmt

#endif

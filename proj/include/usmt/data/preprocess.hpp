#ifndef USMT_DATA_PREPROCESS_HPP
#define USMT_DATA_PREPROCESS_HPP

#include <vector>

#include "usmt/core/rng.hpp"
#include "usmt/core/tensor.hpp"
#include "usmt/data/manifest.hpp"
#include "usmt/data/png_io.hpp"

namespace usmt {

struct PreprocessConfig {
    int target_size = 224;
    double mean = 0.5;  // applied per channel after scaling to [0,1]
    double stddev = 0.25;
    bool augment = false;  // horizontal flip + mild brightness/contrast jitter
};

// Grayscale inputs are replicated to 3 channels, images resized bilinearly to
// target_size x target_size and normalized with the fixed constants.
Tensor preprocess_image(const ImageU8& raw, const PreprocessConfig& cfg);

// Nearest-neighbor resize preserving the label id set.
TensorT<int> resize_mask_nearest(const TensorT<int>& mask, int target_h, int target_w);

TensorT<int> mask_from_image(const ImageU8& raw);

// original-resolution pixels per resized pixel (width-based)
double regression_scale(int original_w, int target_size);

// In-memory training sample; labels are stored in training space with enough
// metadata to map regression predictions back to original pixels.
struct LabeledSample {
    Tensor image;            // {3, S, S}
    TensorT<int> mask;       // seg
    int class_id = -1;       // cls
    double reg_target = 0;   // reg, resized-pixel units
    double reg_original = 0; // reg, original-pixel units
    double scale = 1.0;      // original / resized
    BoundingBox box;         // det, normalized (resize-invariant)
};

struct TaskDataset {
    TaskSpec spec;
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> test;
};

// Loads every sample of a task. Corrupt images are skipped with a note on
// stderr rather than failing the run.
TaskDataset load_task_dataset(const TaskSpec& spec, const std::string& base_dir,
                              const PreprocessConfig& cfg);

// Deterministic split: floor(n * fraction) validation samples, at least 1.
// Returns (train_indices, val_indices); disjoint and exhaustive.
std::pair<std::vector<int>, std::vector<int>> split_train_val(int n, double fraction,
                                                              uint64_t seed);

// Horizontal flip + brightness/contrast jitter applied consistently to image
// and labels; a pure function of the rng stream.
void augment_sample(LabeledSample& s, TaskType type, Rng& rng);

}  // namespace usmt

#endif

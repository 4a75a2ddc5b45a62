#include "usmt/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numeric>

namespace usmt {

namespace fs = std::filesystem;

namespace {

// half-pixel bilinear sampling of one channel
double sample_bilinear(const ImageU8& img, int c, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
    int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
    double wy = y - y0, wx = x - x0;
    return (1 - wy) * ((1 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c)) +
           wy * ((1 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c));
}

}  // namespace

Tensor preprocess_image(const ImageU8& raw, const PreprocessConfig& cfg) {
    if (raw.width < 1 || raw.height < 1 || raw.data.empty())
        throw IoError("preprocess: empty image");
    int s = cfg.target_size;
    Tensor out({3, s, s});
    double sy = static_cast<double>(raw.height) / s;
    double sx = static_cast<double>(raw.width) / s;
    for (int c = 0; c < 3; ++c) {
        int src_c = raw.channels == 1 ? 0 : c;
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                double v = sample_bilinear(raw, src_c, (y + 0.5) * sy - 0.5,
                                           (x + 0.5) * sx - 0.5);
                out.at3(c, y, x) =
                    static_cast<float>((v / 255.0 - cfg.mean) / cfg.stddev);
            }
    }
    return out;
}

TensorT<int> resize_mask_nearest(const TensorT<int>& mask, int target_h, int target_w) {
    if (mask.ndim() != 2) throw ShapeError("resize_mask_nearest: " + mask.shape_str());
    TensorT<int> out({target_h, target_w});
    double sy = static_cast<double>(mask.dim(0)) / target_h;
    double sx = static_cast<double>(mask.dim(1)) / target_w;
    for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
            int src_y = std::min(static_cast<int>((y + 0.5) * sy), mask.dim(0) - 1);
            int src_x = std::min(static_cast<int>((x + 0.5) * sx), mask.dim(1) - 1);
            out.at2(y, x) = mask.at2(src_y, src_x);
        }
    return out;
}

TensorT<int> mask_from_image(const ImageU8& raw) {
    TensorT<int> m({raw.height, raw.width});
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x) m.at2(y, x) = raw.at(y, x, 0);
    return m;
}

double regression_scale(int original_w, int target_size) {
    if (original_w < 1 || target_size < 1)
        throw ValidationError("regression_scale: sizes must be positive");
    return static_cast<double>(original_w) / target_size;
}

TaskDataset load_task_dataset(const TaskSpec& spec, const std::string& base_dir,
                              const PreprocessConfig& cfg) {
    TaskDataset ds;
    ds.spec = spec;
    auto resolve = [&](const std::string& rel) {
        fs::path p(rel);
        return p.is_absolute() ? p.string() : (fs::path(base_dir) / p).string();
    };
    auto load_split = [&](const std::vector<SampleRecord>& records,
                          std::vector<LabeledSample>& out) {
        for (const auto& rec : records) {
            try {
                LabeledSample s;
                ImageU8 raw = read_png(resolve(rec.image));
                s.image = preprocess_image(raw, cfg);
                auto res = rec.original_resolution[0] > 0 ? rec.original_resolution
                                                          : spec.original_resolution;
                s.scale = regression_scale(res[1], cfg.target_size);
                switch (spec.type) {
                    case TaskType::seg: {
                        ImageU8 m = read_png(resolve(rec.mask));
                        auto mask = mask_from_image(m);
                        for (int v : mask.data)
                            if (v >= spec.num_classes)
                                throw ValidationError(
                                    "mask id " + std::to_string(v) + " >= num_classes in " +
                                    rec.mask);
                        s.mask = resize_mask_nearest(mask, cfg.target_size, cfg.target_size);
                        break;
                    }
                    case TaskType::cls:
                        if (rec.class_id >= spec.num_classes)
                            throw ValidationError("class id out of range in " + rec.image);
                        s.class_id = rec.class_id;
                        break;
                    case TaskType::reg:
                        s.reg_original = rec.value;
                        s.reg_target = rec.value / s.scale;
                        break;
                    case TaskType::det:
                        s.box = rec.box;
                        break;
                }
                out.push_back(std::move(s));
            } catch (const IoError& e) {
                std::cerr << "[data] skipping sample '" << rec.image << "' of task '"
                          << spec.task_id << "': " << e.what() << "\n";
            }
        }
    };
    load_split(spec.train, ds.train);
    load_split(spec.test, ds.test);
    return ds;
}

std::pair<std::vector<int>, std::vector<int>> split_train_val(int n, double fraction,
                                                              uint64_t seed) {
    if (n < 2) throw ValidationError("split_train_val needs at least 2 samples, got " +
                                     std::to_string(n));
    if (fraction <= 0.0 || fraction >= 1.0)
        throw ConfigError("validation fraction must be in (0,1)");
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(seed, "train_val_split"));
    rng.shuffle(idx);
    int n_val = std::max(1, static_cast<int>(std::floor(n * fraction)));
    std::vector<int> val(idx.begin(), idx.begin() + n_val);
    std::vector<int> train(idx.begin() + n_val, idx.end());
    return {train, val};
}

void augment_sample(LabeledSample& s, TaskType type, Rng& rng) {
    bool flip = rng.uniform() < 0.5;
    double gain = rng.uniform(0.9, 1.1);
    double bias = rng.uniform(-0.1, 0.1);
    int c_n = s.image.dim(0), h = s.image.dim(1), w = s.image.dim(2);
    Tensor img({c_n, h, w});
    for (int c = 0; c < c_n; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                float v = s.image.at3(c, y, flip ? w - 1 - x : x);
                img.at3(c, y, x) = static_cast<float>(v * gain + bias);
            }
    s.image = std::move(img);
    if (!flip) return;
    if (type == TaskType::seg) {
        TensorT<int> m({h, w});
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) m.at2(y, x) = s.mask.at2(y, w - 1 - x);
        s.mask = std::move(m);
    } else if (type == TaskType::det) {
        s.box.cx = 1.0 - s.box.cx;
    }
}

}  // namespace usmt

#ifndef USMT_HEADS_BOXES_HPP
#define USMT_HEADS_BOXES_HPP

#include <algorithm>
#include <cmath>

#include "usmt/core/tensor.hpp"

namespace usmt {

// Axis-aligned box in image-normalized coordinates.
struct BoundingBox {
    double cx = 0, cy = 0;  // center
    double bw = 0, bh = 0;  // extents as fractions of image size
    double score = 1.0;

    BoundingBox clamped() const {
        BoundingBox b = *this;
        b.cx = std::clamp(b.cx, 0.0, 1.0);
        b.cy = std::clamp(b.cy, 0.0, 1.0);
        b.bw = std::clamp(b.bw, 0.0, 1.0);
        b.bh = std::clamp(b.bh, 0.0, 1.0);
        return b;
    }
};

// Post-activation detector output on the feature grid.
struct DetectionGrid {
    TensorT<double> heatmap;     // {h, w}, objectness in [0,1]
    TensorT<double> box_params;  // {4, h, w}: dx, dy in [0,1), bw, bh in [0,1]
};

// Supervision targets for one ground-truth box on an h x w grid.
struct DetectionTarget {
    TensorT<double> heatmap;  // Gaussian splat peaking at 1 at the center cell
    int cell_y = 0, cell_x = 0;
    double dx = 0, dy = 0, bw = 0, bh = 0;  // regressed at the center cell only
};

inline int gaussian_radius(const BoundingBox& box, int h, int w) {
    double side = std::min(box.bw * w, box.bh * h);
    return std::max(1, static_cast<int>(std::lround(side / 3.0)));
}

inline DetectionTarget detect_encode(const BoundingBox& gt, int h, int w) {
    if (gt.bw <= 0.0 || gt.bh <= 0.0)
        throw ValidationError("degenerate box: bw/bh must be positive");
    if (gt.cx < 0 || gt.cx > 1 || gt.cy < 0 || gt.cy > 1 || gt.bw > 1 || gt.bh > 1)
        throw ValidationError("box outside the unit square");
    DetectionTarget t;
    t.cell_x = std::min(static_cast<int>(std::floor(gt.cx * w)), w - 1);
    t.cell_y = std::min(static_cast<int>(std::floor(gt.cy * h)), h - 1);
    // offsets relative to the clamped cell so the round trip is exact at 1.0
    t.dx = gt.cx * w - t.cell_x;
    t.dy = gt.cy * h - t.cell_y;
    t.bw = gt.bw;
    t.bh = gt.bh;

    int radius = gaussian_radius(gt, h, w);
    double sigma = (2.0 * radius + 1.0) / 6.0;
    t.heatmap = TensorT<double>({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double d2 = double(x - t.cell_x) * (x - t.cell_x) +
                        double(y - t.cell_y) * (y - t.cell_y);
            t.heatmap.at2(y, x) = std::exp(-d2 / (2.0 * sigma * sigma));
        }
    t.heatmap.at2(t.cell_y, t.cell_x) = 1.0;
    return t;
}

// Single-box decode: peak cell of the heatmap, ties broken by the smallest
// row-major cell index.
inline BoundingBox detect_decode(const DetectionGrid& grid) {
    const auto& hm = grid.heatmap;
    if (hm.ndim() != 2) throw ShapeError("detect_decode: heatmap " + hm.shape_str());
    int h = hm.dim(0), w = hm.dim(1);
    if (grid.box_params.ndim() != 3 || grid.box_params.dim(0) != 4 ||
        grid.box_params.dim(1) != h || grid.box_params.dim(2) != w)
        throw ShapeError("detect_decode: box params " + grid.box_params.shape_str() +
                         " do not match heatmap " + hm.shape_str());
    int best = 0;
    for (int i = 1; i < h * w; ++i)
        if (hm.at(i) > hm.at(best)) best = i;
    int cy = best / w, cx = best % w;
    BoundingBox box;
    box.cx = (cx + grid.box_params.at3(0, cy, cx)) / w;
    box.cy = (cy + grid.box_params.at3(1, cy, cx)) / h;
    box.bw = grid.box_params.at3(2, cy, cx);
    box.bh = grid.box_params.at3(3, cy, cx);
    box.score = hm.at2(cy, cx);
    return box;
}

}  // namespace usmt

#endif

#ifndef USMT_CORE_TENSOR_HPP
#define USMT_CORE_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "usmt/core/error.hpp"

namespace usmt {

// Dense row-major tensor. Rank is dynamic; the framework uses {1} for
// scalars, {rows, cols} for token/weight matrices and {C, H, W} for images.
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> shp, S fill = S(0)) : shape(std::move(shp)) {
        data.assign(static_cast<size_t>(count(shape)), fill);
    }

    static TensorT zeros(std::vector<int> shp) { return TensorT(std::move(shp)); }

    static TensorT full(std::vector<int> shp, S v) { return TensorT(std::move(shp), v); }

    static TensorT scalar(S v) {
        TensorT t({1});
        t.data[0] = v;
        return t;
    }

    static TensorT from(std::vector<int> shp, std::vector<S> values) {
        if (count(shp) != static_cast<int64_t>(values.size()))
            throw ShapeError("tensor init: " + shape_str(shp) + " does not hold " +
                             std::to_string(values.size()) + " values");
        TensorT t;
        t.shape = std::move(shp);
        t.data = std::move(values);
        return t;
    }

    static int64_t count(const std::vector<int>& shp) {
        int64_t n = 1;
        for (int d : shp) n *= d;
        return shp.empty() ? 0 : n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    int rows() const { return shape[0]; }
    int cols() const { return shape[1]; }

    S& at(int64_t i) { return data[static_cast<size_t>(i)]; }
    S at(int64_t i) const { return data[static_cast<size_t>(i)]; }

    S& at2(int r, int c) { return data[static_cast<size_t>(r) * shape[1] + c]; }
    S at2(int r, int c) const { return data[static_cast<size_t>(r) * shape[1] + c]; }

    S& at3(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    S at3(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    S item() const {
        if (numel() != 1) throw ShapeError("item() on tensor " + shape_str(shape));
        return data[0];
    }

    template <class T>
    TensorT<T> cast() const {
        TensorT<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }

    static std::string shape_str(const std::vector<int>& shp) {
        std::ostringstream os;
        os << "(";
        for (size_t i = 0; i < shp.size(); ++i) os << (i ? "x" : "") << shp[i];
        os << ")";
        return os.str();
    }

    std::string shape_str() const { return shape_str(shape); }
};

using Tensor = TensorT<float>;

}  // namespace usmt

#endif

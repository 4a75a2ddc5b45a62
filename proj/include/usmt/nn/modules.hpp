#ifndef USMT_NN_MODULES_HPP
#define USMT_NN_MODULES_HPP

#include <string>
#include <vector>

#include "usmt/core/ops.hpp"
#include "usmt/core/rng.hpp"

namespace usmt {
namespace nn {

template <class S>
struct NamedParam {
    std::string name;
    VarT<S> var;
};

template <class S>
using ParamList = std::vector<NamedParam<S>>;

template <class S>
struct LinearT {
    VarT<S> w;  // (in x out)
    VarT<S> b;  // (out)

    LinearT() = default;
    LinearT(int in, int out, Rng& rng, double std = 0.02) {
        TensorT<S> wt({in, out});
        rng.fill_normal(wt, 0.0, std);
        w = VarT<S>::param(std::move(wt));
        b = VarT<S>::param(TensorT<S>({out}));
    }

    VarT<S> forward(VarT<S> x) const { return ops::add_row_broadcast(ops::matmul(x, w), b); }

    void collect(const std::string& prefix, ParamList<S>& out) {
        out.push_back({prefix + "_w", w});
        out.push_back({prefix + "_b", b});
    }
};

template <class S>
struct LayerNormT {
    VarT<S> g;
    VarT<S> b;

    LayerNormT() = default;
    explicit LayerNormT(int dim) {
        g = VarT<S>::param(TensorT<S>::full({dim}, S(1)));
        b = VarT<S>::param(TensorT<S>({dim}));
    }

    VarT<S> forward(VarT<S> x) const { return ops::layer_norm_rows(x, g, b); }

    void collect(const std::string& prefix, ParamList<S>& out) {
        out.push_back({prefix + ".g", g});
        out.push_back({prefix + ".b", b});
    }
};

// Transformer feed-forward sublayer: dim -> hidden -> dim with GELU.
template <class S>
struct MlpT {
    LinearT<S> fc1, fc2;

    MlpT() = default;
    MlpT(int dim, int hidden, Rng& rng) : fc1(dim, hidden, rng), fc2(hidden, dim, rng) {}

    VarT<S> forward(VarT<S> x) const { return fc2.forward(ops::gelu(fc1.forward(x))); }

    void collect(const std::string& prefix, ParamList<S>& out) {
        fc1.collect(prefix + ".fc1", out);
        fc2.collect(prefix + ".fc2", out);
    }
};

template <class S>
struct MultiHeadAttentionT {
    LinearT<S> wq, wk, wv, wo;
    int num_heads = 1;
    int head_dim = 0;

    MultiHeadAttentionT() = default;
    MultiHeadAttentionT(int dim, int heads, Rng& rng)
        : wq(dim, dim, rng), wk(dim, dim, rng), wv(dim, dim, rng), wo(dim, dim, rng),
          num_heads(heads), head_dim(dim / heads) {
        if (dim % heads != 0)
            throw ConfigError("embed_dim " + std::to_string(dim) +
                              " not divisible by num_heads " + std::to_string(heads));
    }

    // x: (N x dim) tokens
    VarT<S> forward(VarT<S> x) const {
        auto q = wq.forward(x);
        auto k = wk.forward(x);
        auto v = wv.forward(x);
        S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
        std::vector<VarT<S>> head_outs;
        head_outs.reserve(num_heads);
        for (int h = 0; h < num_heads; ++h) {
            auto qh = ops::slice_cols(q, h * head_dim, head_dim);
            auto kh = ops::slice_cols(k, h * head_dim, head_dim);
            auto vh = ops::slice_cols(v, h * head_dim, head_dim);
            auto scores = ops::scale(ops::matmul(qh, ops::transpose2d(kh)), inv_sqrt);
            head_outs.push_back(ops::matmul(ops::softmax_rows(scores), vh));
        }
        return wo.forward(ops::concat_cols(head_outs));
    }

    void collect(const std::string& prefix, ParamList<S>& out) {
        wq.collect(prefix + ".q", out);
        wk.collect(prefix + ".k", out);
        wv.collect(prefix + ".v", out);
        wo.collect(prefix + ".o", out);
    }
};

}  // namespace nn
}  // namespace usmt

#endif

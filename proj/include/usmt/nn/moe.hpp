#ifndef USMT_NN_MOE_HPP
#define USMT_NN_MOE_HPP

#include <map>
#include <string>
#include <vector>

#include "usmt/nn/modules.hpp"

namespace usmt {
namespace nn {

// Learnable per-task embedding table. Rows are independent parameters so
// tasks can be added per training unit and serialized by task id.
template <class S>
struct TaskEmbeddingT {
    int dim = 0;
    std::vector<std::string> ids;  // registration order
    std::map<std::string, int> index;
    std::vector<VarT<S>> rows;  // each (1 x dim)

    TaskEmbeddingT() = default;
    explicit TaskEmbeddingT(int d) : dim(d) {}

    void register_task(const std::string& task_id, Rng& rng) {
        if (index.count(task_id))
            throw ValidationError("task '" + task_id + "' registered twice");
        TensorT<S> row({1, dim});
        rng.fill_normal(row, 0.0, 0.02);
        index[task_id] = static_cast<int>(rows.size());
        ids.push_back(task_id);
        rows.push_back(VarT<S>::param(std::move(row)));
    }

    bool has(const std::string& task_id) const { return index.count(task_id) != 0; }
    int size() const { return static_cast<int>(rows.size()); }

    VarT<S> lookup(const std::string& task_id) const {
        auto it = index.find(task_id);
        if (it == index.end())
            throw ValidationError("task '" + task_id + "' is not registered");
        return rows[static_cast<size_t>(it->second)];
    }

    // Current embedding values (deterministic between parameter updates).
    TensorT<S> embed(const std::string& task_id) const { return lookup(task_id).value(); }

    void collect(ParamList<S>& out) {
        for (size_t i = 0; i < rows.size(); ++i)
            out.push_back({"task_embed." + ids[i], rows[i]});
    }
};

// softmax(W_g [h; e]) for a single token; W_g is (K x (D + task_embed_dim)).
template <class S>
TensorT<S> gate_weights(const TensorT<S>& h, const TensorT<S>& e, const TensorT<S>& w_g) {
    if (w_g.ndim() != 2 || h.numel() + e.numel() != w_g.cols())
        throw ShapeError("gate: [h;e] has " + std::to_string(h.numel() + e.numel()) +
                         " dims, W_g expects " + std::to_string(w_g.cols()));
    int k = w_g.rows();
    TensorT<S> logits({k});
    for (int i = 0; i < k; ++i) {
        S acc = S(0);
        for (int64_t j = 0; j < h.numel(); ++j) acc += w_g.at2(i, static_cast<int>(j)) * h.at(j);
        for (int64_t j = 0; j < e.numel(); ++j)
            acc += w_g.at2(i, static_cast<int>(h.numel() + j)) * e.at(j);
        logits.at(i) = acc;
    }
    S mx = logits.at(0);
    for (int i = 1; i < k; ++i) mx = std::max(mx, logits.at(i));
    S sum = S(0);
    for (int i = 0; i < k; ++i) {
        logits.at(i) = static_cast<S>(std::exp(static_cast<double>(logits.at(i) - mx)));
        sum += logits.at(i);
    }
    for (int i = 0; i < k; ++i) logits.at(i) /= sum;
    return logits;
}

// Mixture-of-experts feed-forward sublayer with task-conditioned dense
// routing: every expert runs on every token and outputs are blended by the
// per-token gate distribution.
template <class S>
struct MoeBlockT {
    int layer_index = 0;  // 1-based position in the encoder
    int dim = 0;
    int task_embed_dim = 0;
    VarT<S> gate_w;  // (K x (dim + task_embed_dim))
    std::vector<MlpT<S>> experts;
    int forced_expert = -1;  // test hook; -1 = normal routing

    MoeBlockT() = default;
    MoeBlockT(int layer, int d, int hidden, int k, int te_dim, Rng& rng)
        : layer_index(layer), dim(d), task_embed_dim(te_dim) {
        if (k < 1) throw ConfigError("num_experts must be >= 1");
        TensorT<S> gw({k, d + te_dim});
        rng.fill_normal(gw, 0.0, 0.02);
        gate_w = VarT<S>::param(std::move(gw));
        experts.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) experts.emplace_back(d, hidden, rng);
    }

    int num_experts() const { return static_cast<int>(experts.size()); }

    // tokens: (N x dim), task_embed: (1 x task_embed_dim) -> (N x K)
    VarT<S> gate(VarT<S> tokens, VarT<S> task_embed) const {
        int n = tokens.value().rows();
        auto cat = ops::concat_cols<S>({tokens, ops::repeat_rows(task_embed, n)});
        return ops::softmax_rows(ops::matmul(cat, ops::transpose2d(gate_w)));
    }

    // tokens: (N x dim) -> (N x dim)
    VarT<S> forward(VarT<S> tokens, VarT<S> task_embed) const {
        if (!tokens.value().all_finite())
            throw NumericError("moe layer " + std::to_string(layer_index) +
                               ": non-finite input tokens");
        if (forced_expert >= 0) return experts[forced_expert].forward(tokens);
        auto g = gate(tokens, task_embed);
        VarT<S> acc;
        for (int i = 0; i < num_experts(); ++i) {
            auto weighted = ops::mul_col_broadcast(experts[i].forward(tokens),
                                                   ops::slice_cols(g, i, 1));
            acc = acc.defined() ? ops::add(acc, weighted) : weighted;
        }
        return acc;
    }

    // Single-token convenience used by tests and diagnostics.
    TensorT<S> forward_single(const TensorT<S>& h, VarT<S> task_embed) const {
        NoGradGuard ng;
        auto tok = VarT<S>::constant(TensorT<S>::from({1, dim}, h.data));
        return forward(tok, task_embed).value();
    }

    void collect(const std::string& prefix, ParamList<S>& out) {
        out.push_back({prefix + ".gate_w", gate_w});
        for (size_t i = 0; i < experts.size(); ++i)
            experts[i].collect(prefix + ".expert." + std::to_string(i), out);
    }
};

}  // namespace nn
}  // namespace usmt

#endif

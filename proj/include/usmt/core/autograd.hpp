#ifndef USMT_CORE_AUTOGRAD_HPP
#define USMT_CORE_AUTOGRAD_HPP

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "usmt/core/tensor.hpp"

namespace usmt {

// Reverse-mode autodiff over TensorT. A forward pass builds a DAG of nodes;
// backward() walks it in reverse topological order. Children hold shared_ptrs
// to parents, so releasing the loss root frees the graph while parameter
// nodes (held by their modules) survive and keep accumulated gradients.

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

template <class S>
struct NodeT {
    TensorT<S> value;
    TensorT<S> grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void()> backprop;  // pushes this->grad into parents

    TensorT<S>& ensure_grad() {
        if (grad.shape != value.shape) grad = TensorT<S>::zeros(value.shape);
        return grad;
    }
};

template <class S>
class VarT {
  public:
    VarT() = default;

    static VarT constant(TensorT<S> t) {
        VarT v;
        v.n_ = std::make_shared<NodeT<S>>();
        v.n_->value = std::move(t);
        return v;
    }

    static VarT param(TensorT<S> t) {
        VarT v = constant(std::move(t));
        v.n_->requires_grad = true;
        return v;
    }

    bool defined() const { return static_cast<bool>(n_); }
    const TensorT<S>& value() const { return n_->value; }
    TensorT<S>& mutable_value() { return n_->value; }
    TensorT<S>& grad() { return n_->ensure_grad(); }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    std::shared_ptr<NodeT<S>> node() const { return n_; }

    void zero_grad() {
        if (n_ && n_->grad.shape == n_->value.shape)
            std::fill(n_->grad.data.begin(), n_->grad.data.end(), S(0));
    }

    // Backpropagate from a scalar root.
    void backward() {
        if (!n_) throw Error("backward on undefined var");
        if (n_->value.numel() != 1)
            throw ShapeError("backward root must be scalar, got " + n_->value.shape_str());
        std::vector<NodeT<S>*> order;
        std::unordered_set<NodeT<S>*> seen;
        topo(n_.get(), seen, order);
        n_->ensure_grad().data[0] = S(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if ((*it)->backprop) (*it)->backprop();
    }

    static VarT make_op(TensorT<S> value, std::vector<VarT> inputs,
                        std::function<void(NodeT<S>&)> make_backprop) {
        VarT out;
        out.n_ = std::make_shared<NodeT<S>>();
        out.n_->value = std::move(value);
        bool need = false;
        if (grad_mode())
            for (const auto& in : inputs) need = need || in.requires_grad();
        if (need) {
            out.n_->requires_grad = true;
            for (auto& in : inputs) out.n_->parents.push_back(in.n_);
            make_backprop(*out.n_);
        }
        return out;
    }

  private:
    std::shared_ptr<NodeT<S>> n_;

    static void topo(NodeT<S>* node, std::unordered_set<NodeT<S>*>& seen,
                     std::vector<NodeT<S>*>& order) {
        // iterative DFS; graphs can be a few thousand nodes deep
        std::vector<std::pair<NodeT<S>*, size_t>> stack{{node, 0}};
        seen.insert(node);
        while (!stack.empty()) {
            auto& [n, idx] = stack.back();
            if (idx < n->parents.size()) {
                NodeT<S>* p = n->parents[idx++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.emplace_back(p, 0);
                }
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }
};

using Var = VarT<float>;

// dst += scale * src
template <class S>
inline void axpy(TensorT<S>& dst, const TensorT<S>& src, S scale = S(1)) {
    for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += scale * src.data[i];
}

}  // namespace usmt

#endif

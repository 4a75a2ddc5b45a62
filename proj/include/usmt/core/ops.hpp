#ifndef USMT_CORE_OPS_HPP
#define USMT_CORE_OPS_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "usmt/core/autograd.hpp"

namespace usmt {
namespace ops {

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Map = Eigen::Map<EMat<S>>;
template <class S>
using CMap = Eigen::Map<const EMat<S>>;

template <class S>
inline void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
}

// ---- elementwise ----

template <class S>
VarT<S> add(VarT<S> a, VarT<S> b) {
    check_same_shape(a.value(), b.value(), "add");
    TensorT<S> v = a.value();
    axpy(v, b.value());
    return VarT<S>::make_op(std::move(v), {a, b}, [a, b](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node(), bn = b.node();
        out.backprop = [o, an, bn] {
            if (an->requires_grad) axpy(an->ensure_grad(), o->grad);
            if (bn->requires_grad) axpy(bn->ensure_grad(), o->grad);
        };
    });
}

template <class S>
VarT<S> sub(VarT<S> a, VarT<S> b) {
    check_same_shape(a.value(), b.value(), "sub");
    TensorT<S> v = a.value();
    axpy(v, b.value(), S(-1));
    return VarT<S>::make_op(std::move(v), {a, b}, [a, b](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node(), bn = b.node();
        out.backprop = [o, an, bn] {
            if (an->requires_grad) axpy(an->ensure_grad(), o->grad);
            if (bn->requires_grad) axpy(bn->ensure_grad(), o->grad, S(-1));
        };
    });
}

template <class S>
VarT<S> mul(VarT<S> a, VarT<S> b) {
    check_same_shape(a.value(), b.value(), "mul");
    TensorT<S> v = a.value();
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] *= b.value().data[i];
    return VarT<S>::make_op(std::move(v), {a, b}, [a, b](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node(), bn = b.node();
        out.backprop = [o, an, bn] {
            if (an->requires_grad) {
                auto& g = an->ensure_grad();
                for (size_t i = 0; i < g.data.size(); ++i)
                    g.data[i] += o->grad.data[i] * bn->value.data[i];
            }
            if (bn->requires_grad) {
                auto& g = bn->ensure_grad();
                for (size_t i = 0; i < g.data.size(); ++i)
                    g.data[i] += o->grad.data[i] * an->value.data[i];
            }
        };
    });
}

template <class S>
VarT<S> div(VarT<S> a, VarT<S> b) {
    check_same_shape(a.value(), b.value(), "div");
    TensorT<S> v = a.value();
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] /= b.value().data[i];
    return VarT<S>::make_op(std::move(v), {a, b}, [a, b](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node(), bn = b.node();
        out.backprop = [o, an, bn] {
            for (size_t i = 0; i < o->grad.data.size(); ++i) {
                S g = o->grad.data[i];
                S bv = bn->value.data[i];
                if (an->requires_grad) an->ensure_grad().data[i] += g / bv;
                if (bn->requires_grad)
                    bn->ensure_grad().data[i] -= g * an->value.data[i] / (bv * bv);
            }
        };
    });
}

template <class S>
VarT<S> scale(VarT<S> a, S c) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) x *= c;
    return VarT<S>::make_op(std::move(v), {a}, [a, c](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an, c] { axpy(an->ensure_grad(), o->grad, c); };
    });
}

template <class S>
VarT<S> add_const(VarT<S> a, S c) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) x += c;
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] { axpy(an->ensure_grad(), o->grad); };
    });
}

// ---- activations ----

template <class S>
VarT<S> relu(VarT<S> a) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) x = x > S(0) ? x : S(0);
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] {
            auto& g = an->ensure_grad();
            for (size_t i = 0; i < g.data.size(); ++i)
                if (an->value.data[i] > S(0)) g.data[i] += o->grad.data[i];
        };
    });
}

template <class S>
VarT<S> gelu(VarT<S> a) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) {
        double xd = static_cast<double>(x);
        x = static_cast<S>(0.5 * xd * (1.0 + std::erf(xd * M_SQRT1_2)));
    }
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] {
            auto& g = an->ensure_grad();
            constexpr double inv_sqrt_2pi = 0.3989422804014327;
            for (size_t i = 0; i < g.data.size(); ++i) {
                double x = static_cast<double>(an->value.data[i]);
                double d = 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
                           x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
                g.data[i] += o->grad.data[i] * static_cast<S>(d);
            }
        };
    });
}

template <class S>
VarT<S> sigmoid(VarT<S> a) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) {
        double xd = static_cast<double>(x);
        x = static_cast<S>(1.0 / (1.0 + std::exp(-xd)));
    }
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] {
            auto& g = an->ensure_grad();
            for (size_t i = 0; i < g.data.size(); ++i) {
                S y = o->value.data[i];
                g.data[i] += o->grad.data[i] * y * (S(1) - y);
            }
        };
    });
}

// ---- linear algebra ----

template <class S>
VarT<S> matmul(VarT<S> a, VarT<S> b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows())
        throw ShapeError("matmul: " + av.shape_str() + " x " + bv.shape_str());
    TensorT<S> v({av.rows(), bv.cols()});
    Map<S>(v.data.data(), v.rows(), v.cols()) =
        CMap<S>(av.data.data(), av.rows(), av.cols()) *
        CMap<S>(bv.data.data(), bv.rows(), bv.cols());
    return VarT<S>::make_op(std::move(v), {a, b}, [a, b](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node(), bn = b.node();
        out.backprop = [o, an, bn] {
            CMap<S> g(o->grad.data.data(), o->grad.rows(), o->grad.cols());
            if (an->requires_grad) {
                auto& ag = an->ensure_grad();
                Map<S>(ag.data.data(), ag.rows(), ag.cols()).noalias() +=
                    g * CMap<S>(bn->value.data.data(), bn->value.rows(), bn->value.cols())
                            .transpose();
            }
            if (bn->requires_grad) {
                auto& bg = bn->ensure_grad();
                Map<S>(bg.data.data(), bg.rows(), bg.cols()).noalias() +=
                    CMap<S>(an->value.data.data(), an->value.rows(), an->value.cols())
                        .transpose() *
                    g;
            }
        };
    });
}

template <class S>
VarT<S> transpose2d(VarT<S> a) {
    const auto& av = a.value();
    if (av.ndim() != 2) throw ShapeError("transpose2d: " + av.shape_str());
    TensorT<S> v({av.cols(), av.rows()});
    for (int r = 0; r < av.rows(); ++r)
        for (int c = 0; c < av.cols(); ++c) v.at2(c, r) = av.at2(r, c);
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] {
            auto& ag = an->ensure_grad();
            for (int r = 0; r < ag.rows(); ++r)
                for (int c = 0; c < ag.cols(); ++c) ag.at2(r, c) += o->grad.at2(c, r);
        };
    });
}

template <class S>
VarT<S> reshape(VarT<S> a, std::vector<int> shape) {
    if (TensorT<S>::count(shape) != a.value().numel())
        throw ShapeError("reshape: " + a.value().shape_str() + " -> " +
                         TensorT<S>::shape_str(shape));
    TensorT<S> v = a.value();
    v.shape = std::move(shape);
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] { axpy(an->ensure_grad(), o->grad); };
    });
}

template <class S>
VarT<S> slice_rows(VarT<S> a, int r0, int len) {
    const auto& av = a.value();
    if (av.ndim() != 2 || r0 < 0 || r0 + len > av.rows())
        throw ShapeError("slice_rows [" + std::to_string(r0) + "," +
                         std::to_string(r0 + len) + ") of " + av.shape_str());
    TensorT<S> v({len, av.cols()});
    std::copy_n(av.data.begin() + static_cast<size_t>(r0) * av.cols(),
                static_cast<size_t>(len) * av.cols(), v.data.begin());
    return VarT<S>::make_op(std::move(v), {a}, [a, r0, len](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an, r0] {
            auto& ag = an->ensure_grad();
            size_t off = static_cast<size_t>(r0) * ag.cols();
            for (size_t i = 0; i < o->grad.data.size(); ++i)
                ag.data[off + i] += o->grad.data[i];
        };
    });
}

template <class S>
VarT<S> slice_cols(VarT<S> a, int c0, int len) {
    const auto& av = a.value();
    if (av.ndim() != 2 || c0 < 0 || c0 + len > av.cols())
        throw ShapeError("slice_cols [" + std::to_string(c0) + "," +
                         std::to_string(c0 + len) + ") of " + av.shape_str());
    TensorT<S> v({av.rows(), len});
    for (int r = 0; r < av.rows(); ++r)
        std::copy_n(av.data.begin() + static_cast<size_t>(r) * av.cols() + c0, len,
                    v.data.begin() + static_cast<size_t>(r) * len);
    return VarT<S>::make_op(std::move(v), {a}, [a, c0, len](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an, c0, len] {
            auto& ag = an->ensure_grad();
            for (int r = 0; r < ag.rows(); ++r)
                for (int c = 0; c < len; ++c) ag.at2(r, c0 + c) += o->grad.at2(r, c);
        };
    });
}

template <class S>
VarT<S> concat_rows(std::vector<VarT<S>> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: empty input list");
    int cols = parts[0].value().cols();
    int rows = 0;
    for (auto& p : parts) {
        if (p.value().ndim() != 2 || p.value().cols() != cols)
            throw ShapeError("concat_rows: inconsistent part " + p.value().shape_str());
        rows += p.value().rows();
    }
    TensorT<S> v({rows, cols});
    size_t off = 0;
    for (auto& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), v.data.begin() + off);
        off += p.value().data.size();
    }
    return VarT<S>::make_op(std::move(v), parts, [parts](NodeT<S>& out) {
        NodeT<S>* o = &out;
        out.backprop = [o, parts] {
            size_t off = 0;
            for (auto& p : parts) {
                auto pn = p.node();
                size_t n = pn->value.data.size();
                if (pn->requires_grad) {
                    auto& g = pn->ensure_grad();
                    for (size_t i = 0; i < n; ++i) g.data[i] += o->grad.data[off + i];
                }
                off += n;
            }
        };
    });
}

template <class S>
VarT<S> concat_cols(std::vector<VarT<S>> parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty input list");
    int rows = parts[0].value().rows();
    int cols = 0;
    for (auto& p : parts) {
        if (p.value().ndim() != 2 || p.value().rows() != rows)
            throw ShapeError("concat_cols: inconsistent part " + p.value().shape_str());
        cols += p.value().cols();
    }
    TensorT<S> v({rows, cols});
    int c0 = 0;
    for (auto& p : parts) {
        const auto& pv = p.value();
        int pc = pv.cols();
        for (int r = 0; r < rows; ++r)
            std::copy_n(pv.data.begin() + static_cast<size_t>(r) * pc, pc,
                        v.data.begin() + static_cast<size_t>(r) * cols + c0);
        c0 += pc;
    }
    return VarT<S>::make_op(std::move(v), parts, [parts](NodeT<S>& out) {
        NodeT<S>* o = &out;
        out.backprop = [o, parts] {
            int c0 = 0;
            for (auto& p : parts) {
                auto pn = p.node();
                int pc = pn->value.cols();
                if (pn->requires_grad) {
                    auto& g = pn->ensure_grad();
                    for (int r = 0; r < g.rows(); ++r)
                        for (int c = 0; c < pc; ++c) g.at2(r, c) += o->grad.at2(r, c0 + c);
                }
                c0 += pc;
            }
        };
    });
}

// y[i, j] = x[i, j] + r[j]
template <class S>
VarT<S> add_row_broadcast(VarT<S> x, VarT<S> r) {
    const auto& xv = x.value();
    if (xv.ndim() != 2 || r.value().numel() != xv.cols())
        throw ShapeError("add_row_broadcast: " + xv.shape_str() + " + " +
                         r.value().shape_str());
    TensorT<S> v = xv;
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) v.at2(i, j) += r.value().at(j);
    return VarT<S>::make_op(std::move(v), {x, r}, [x, r](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node(), rn = r.node();
        out.backprop = [o, xn, rn] {
            if (xn->requires_grad) axpy(xn->ensure_grad(), o->grad);
            if (rn->requires_grad) {
                auto& g = rn->ensure_grad();
                for (int i = 0; i < o->grad.rows(); ++i)
                    for (int j = 0; j < o->grad.cols(); ++j) g.at(j) += o->grad.at2(i, j);
            }
        };
    });
}

// y[i, j] = x[i, j] * w[i]
template <class S>
VarT<S> mul_col_broadcast(VarT<S> x, VarT<S> w) {
    const auto& xv = x.value();
    if (xv.ndim() != 2 || w.value().numel() != xv.rows())
        throw ShapeError("mul_col_broadcast: " + xv.shape_str() + " * " +
                         w.value().shape_str());
    TensorT<S> v = xv;
    for (int i = 0; i < xv.rows(); ++i) {
        S wi = w.value().at(i);
        for (int j = 0; j < xv.cols(); ++j) v.at2(i, j) *= wi;
    }
    return VarT<S>::make_op(std::move(v), {x, w}, [x, w](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node(), wn = w.node();
        out.backprop = [o, xn, wn] {
            for (int i = 0; i < o->grad.rows(); ++i) {
                S wi = wn->value.at(i);
                S acc = S(0);
                for (int j = 0; j < o->grad.cols(); ++j) {
                    S g = o->grad.at2(i, j);
                    if (xn->requires_grad) xn->ensure_grad().at2(i, j) += g * wi;
                    acc += g * xn->value.at2(i, j);
                }
                if (wn->requires_grad) wn->ensure_grad().at(i) += acc;
            }
        };
    });
}

template <class S>
VarT<S> repeat_rows(VarT<S> r, int m) {
    if (r.value().numel() != r.value().dim(r.value().ndim() - 1) && r.value().ndim() != 1)
        throw ShapeError("repeat_rows expects a row vector, got " + r.value().shape_str());
    int n = static_cast<int>(r.value().numel());
    TensorT<S> v({m, n});
    for (int i = 0; i < m; ++i)
        std::copy(r.value().data.begin(), r.value().data.end(), v.data.begin() + (size_t)i * n);
    return VarT<S>::make_op(std::move(v), {r}, [r](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto rn = r.node();
        out.backprop = [o, rn] {
            auto& g = rn->ensure_grad();
            int n = static_cast<int>(g.data.size());
            for (int i = 0; i < o->grad.rows(); ++i)
                for (int j = 0; j < n; ++j) g.data[j] += o->grad.at2(i, j);
        };
    });
}

// ---- reductions ----

template <class S>
VarT<S> mean_rows(VarT<S> x) {
    const auto& xv = x.value();
    if (xv.ndim() != 2) throw ShapeError("mean_rows: " + xv.shape_str());
    int m = xv.rows(), n = xv.cols();
    TensorT<S> v({1, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) v.at2(0, j) += xv.at2(i, j);
    for (auto& a : v.data) a /= static_cast<S>(m);
    return VarT<S>::make_op(std::move(v), {x}, [x, m](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn, m] {
            auto& g = xn->ensure_grad();
            S inv = S(1) / static_cast<S>(m);
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) g.at2(i, j) += o->grad.at2(0, j) * inv;
        };
    });
}

template <class S>
VarT<S> sum_all(VarT<S> x) {
    S acc = S(0);
    for (S v : x.value().data) acc += v;
    return VarT<S>::make_op(TensorT<S>::scalar(acc), {x}, [x](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn] {
            auto& g = xn->ensure_grad();
            S s = o->grad.data[0];
            for (auto& v : g.data) v += s;
        };
    });
}

template <class S>
VarT<S> mean_all(VarT<S> x) {
    return scale(sum_all(x), S(1) / static_cast<S>(x.value().numel()));
}

// ---- softmax / layernorm ----

template <class S>
VarT<S> softmax_rows(VarT<S> x) {
    const auto& xv = x.value();
    if (xv.ndim() != 2) throw ShapeError("softmax_rows: " + xv.shape_str());
    TensorT<S> v = xv;
    int m = xv.rows(), n = xv.cols();
    for (int i = 0; i < m; ++i) {
        S mx = v.at2(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, v.at2(i, j));
        S sum = S(0);
        for (int j = 0; j < n; ++j) {
            S e = static_cast<S>(std::exp(static_cast<double>(v.at2(i, j) - mx)));
            v.at2(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < n; ++j) v.at2(i, j) /= sum;
    }
    return VarT<S>::make_op(std::move(v), {x}, [x](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn] {
            auto& g = xn->ensure_grad();
            for (int i = 0; i < g.rows(); ++i) {
                S dot = S(0);
                for (int j = 0; j < g.cols(); ++j)
                    dot += o->grad.at2(i, j) * o->value.at2(i, j);
                for (int j = 0; j < g.cols(); ++j)
                    g.at2(i, j) += o->value.at2(i, j) * (o->grad.at2(i, j) - dot);
            }
        };
    });
}

template <class S>
VarT<S> log_softmax_rows(VarT<S> x) {
    const auto& xv = x.value();
    if (xv.ndim() != 2) throw ShapeError("log_softmax_rows: " + xv.shape_str());
    TensorT<S> v = xv;
    int m = xv.rows(), n = xv.cols();
    for (int i = 0; i < m; ++i) {
        S mx = v.at2(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, v.at2(i, j));
        double sum = 0.0;
        for (int j = 0; j < n; ++j) sum += std::exp(static_cast<double>(v.at2(i, j) - mx));
        S lse = mx + static_cast<S>(std::log(sum));
        for (int j = 0; j < n; ++j) v.at2(i, j) -= lse;
    }
    return VarT<S>::make_op(std::move(v), {x}, [x](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn] {
            auto& g = xn->ensure_grad();
            for (int i = 0; i < g.rows(); ++i) {
                S gsum = S(0);
                for (int j = 0; j < g.cols(); ++j) gsum += o->grad.at2(i, j);
                for (int j = 0; j < g.cols(); ++j) {
                    S p = static_cast<S>(std::exp(static_cast<double>(o->value.at2(i, j))));
                    g.at2(i, j) += o->grad.at2(i, j) - p * gsum;
                }
            }
        };
    });
}

template <class S>
VarT<S> layer_norm_rows(VarT<S> x, VarT<S> gamma, VarT<S> beta, S eps = S(1e-5)) {
    const auto& xv = x.value();
    int n = xv.cols();
    if (xv.ndim() != 2 || gamma.value().numel() != n || beta.value().numel() != n)
        throw ShapeError("layer_norm_rows: " + xv.shape_str());
    int m = xv.rows();
    TensorT<S> v({m, n});
    TensorT<S> xhat({m, n});
    TensorT<S> inv_sigma({m});
    for (int i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += xv.at2(i, j);
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            double d = xv.at2(i, j) - mu;
            var += d * d;
        }
        var /= n;
        double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
        inv_sigma.at(i) = static_cast<S>(is);
        for (int j = 0; j < n; ++j) {
            S xh = static_cast<S>((xv.at2(i, j) - mu) * is);
            xhat.at2(i, j) = xh;
            v.at2(i, j) = xh * gamma.value().at(j) + beta.value().at(j);
        }
    }
    return VarT<S>::make_op(
        std::move(v), {x, gamma, beta},
        [x, gamma, beta, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](
            NodeT<S>& out) {
            NodeT<S>* o = &out;
            auto xn = x.node(), gn = gamma.node(), bn = beta.node();
            out.backprop = [o, xn, gn, bn, xhat, inv_sigma] {
                int m = xhat.rows(), n = xhat.cols();
                for (int i = 0; i < m; ++i) {
                    S mean_gy = S(0), mean_gyxh = S(0);
                    for (int j = 0; j < n; ++j) {
                        S gy = o->grad.at2(i, j) * gn->value.at(j);
                        mean_gy += gy;
                        mean_gyxh += gy * xhat.at2(i, j);
                    }
                    mean_gy /= static_cast<S>(n);
                    mean_gyxh /= static_cast<S>(n);
                    if (xn->requires_grad) {
                        auto& gx = xn->ensure_grad();
                        for (int j = 0; j < n; ++j) {
                            S gy = o->grad.at2(i, j) * gn->value.at(j);
                            gx.at2(i, j) +=
                                (gy - mean_gy - xhat.at2(i, j) * mean_gyxh) * inv_sigma.at(i);
                        }
                    }
                    if (gn->requires_grad) {
                        auto& gg = gn->ensure_grad();
                        for (int j = 0; j < n; ++j)
                            gg.at(j) += o->grad.at2(i, j) * xhat.at2(i, j);
                    }
                    if (bn->requires_grad) {
                        auto& gb = bn->ensure_grad();
                        for (int j = 0; j < n; ++j) gb.at(j) += o->grad.at2(i, j);
                    }
                }
            };
        });
}

// ---- convolution / resampling ----

namespace detail {

template <class S>
void im2col(const TensorT<S>& x, int kh, int kw, int stride, int pad, int ho, int wo,
            TensorT<S>& cols) {
    int c_in = x.dim(0), h = x.dim(1), w = x.dim(2);
    for (int c = 0; c < c_in; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                int row = (c * kh + ky) * kw + kx;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        S v = S(0);
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w) v = x.at3(c, iy, ix);
                        cols.at2(row, oy * wo + ox) = v;
                    }
                }
            }
}

template <class S>
void col2im_accum(const TensorT<S>& cols, int kh, int kw, int stride, int pad, int ho,
                  int wo, TensorT<S>& gx) {
    int c_in = gx.dim(0), h = gx.dim(1), w = gx.dim(2);
    for (int c = 0; c < c_in; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                int row = (c * kh + ky) * kw + kx;
                for (int oy = 0; oy < ho; ++oy) {
                    int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int ox = 0; ox < wo; ++ox) {
                        int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= w) continue;
                        gx.at3(c, iy, ix) += cols.at2(row, oy * wo + ox);
                    }
                }
            }
}

}  // namespace detail

// x {C,H,W}, w {O,C,kh,kw}, b {O} -> {O,Ho,Wo}
template <class S>
VarT<S> conv2d(VarT<S> x, VarT<S> w, VarT<S> b, int stride = 1, int pad = 0) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    if (xv.ndim() != 3 || wv.ndim() != 4 || wv.dim(1) != xv.dim(0))
        throw ShapeError("conv2d: x " + xv.shape_str() + " w " + wv.shape_str());
    int c_out = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
    if (b.value().numel() != c_out) throw ShapeError("conv2d: bias " + b.value().shape_str());
    int ho = (xv.dim(1) + 2 * pad - kh) / stride + 1;
    int wo = (xv.dim(2) + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0)
        throw ShapeError("conv2d: kernel larger than padded input " + xv.shape_str());
    int krows = xv.dim(0) * kh * kw;
    auto cols = std::make_shared<TensorT<S>>(std::vector<int>{krows, ho * wo});
    detail::im2col(xv, kh, kw, stride, pad, ho, wo, *cols);
    TensorT<S> v({c_out, ho, wo});
    Map<S>(v.data.data(), c_out, ho * wo).noalias() =
        CMap<S>(wv.data.data(), c_out, krows) *
        CMap<S>(cols->data.data(), krows, ho * wo);
    for (int o = 0; o < c_out; ++o) {
        S bias = b.value().at(o);
        for (int i = 0; i < ho * wo; ++i) v.data[(size_t)o * ho * wo + i] += bias;
    }
    return VarT<S>::make_op(
        std::move(v), {x, w, b}, [x, w, b, cols, stride, pad, ho, wo](NodeT<S>& out) {
            NodeT<S>* o = &out;
            auto xn = x.node(), wn = w.node(), bn = b.node();
            out.backprop = [o, xn, wn, bn, cols, stride, pad, ho, wo] {
                int c_out = wn->value.dim(0), kh = wn->value.dim(2), kw = wn->value.dim(3);
                int krows = wn->value.dim(1) * kh * kw;
                CMap<S> g(o->grad.data.data(), c_out, ho * wo);
                if (wn->requires_grad) {
                    auto& gw = wn->ensure_grad();
                    Map<S>(gw.data.data(), c_out, krows).noalias() +=
                        g * CMap<S>(cols->data.data(), krows, ho * wo).transpose();
                }
                if (bn->requires_grad) {
                    auto& gb = bn->ensure_grad();
                    for (int oc = 0; oc < c_out; ++oc) {
                        S acc = S(0);
                        for (int i = 0; i < ho * wo; ++i)
                            acc += o->grad.data[(size_t)oc * ho * wo + i];
                        gb.at(oc) += acc;
                    }
                }
                if (xn->requires_grad) {
                    TensorT<S> gcols({krows, ho * wo});
                    Map<S>(gcols.data.data(), krows, ho * wo).noalias() =
                        CMap<S>(wn->value.data.data(), c_out, krows).transpose() * g;
                    detail::col2im_accum(gcols, kh, kw, stride, pad, ho, wo,
                                         xn->ensure_grad());
                }
            };
        });
}

// Bilinear resampling with half-pixel centers; x {C,H,W} -> {C,h2,w2}
template <class S>
VarT<S> resize_bilinear(VarT<S> x, int h2, int w2) {
    const auto& xv = x.value();
    if (xv.ndim() != 3) throw ShapeError("resize_bilinear: " + xv.shape_str());
    int c_in = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (h2 < 1 || w2 < 1) throw ShapeError("resize_bilinear: bad target size");

    struct Axis {
        std::vector<int> i0, i1;
        std::vector<S> w1;  // weight of i1; weight of i0 is 1-w1
    };
    auto make_axis = [](int src, int dst) {
        Axis ax;
        ax.i0.resize(dst);
        ax.i1.resize(dst);
        ax.w1.resize(dst);
        double scale = static_cast<double>(src) / dst;
        for (int d = 0; d < dst; ++d) {
            double p = (d + 0.5) * scale - 0.5;
            if (p < 0) p = 0;
            if (p > src - 1) p = src - 1;
            int i0 = static_cast<int>(std::floor(p));
            int i1 = std::min(i0 + 1, src - 1);
            ax.i0[d] = i0;
            ax.i1[d] = i1;
            ax.w1[d] = static_cast<S>(p - i0);
        }
        return ax;
    };
    auto ay = std::make_shared<Axis>(make_axis(h, h2));
    auto axx = std::make_shared<Axis>(make_axis(w, w2));

    TensorT<S> v({c_in, h2, w2});
    for (int c = 0; c < c_in; ++c)
        for (int y = 0; y < h2; ++y) {
            S wy1 = ay->w1[y];
            int y0 = ay->i0[y], y1 = ay->i1[y];
            for (int xo = 0; xo < w2; ++xo) {
                S wx1 = axx->w1[xo];
                int x0 = axx->i0[xo], x1 = axx->i1[xo];
                v.at3(c, y, xo) = (S(1) - wy1) * ((S(1) - wx1) * xv.at3(c, y0, x0) +
                                                  wx1 * xv.at3(c, y0, x1)) +
                                  wy1 * ((S(1) - wx1) * xv.at3(c, y1, x0) +
                                         wx1 * xv.at3(c, y1, x1));
            }
        }
    return VarT<S>::make_op(std::move(v), {x}, [x, ay, axx, h2, w2](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn, ay, axx, h2, w2] {
            auto& gx = xn->ensure_grad();
            int c_in = gx.dim(0);
            for (int c = 0; c < c_in; ++c)
                for (int y = 0; y < h2; ++y) {
                    S wy1 = ay->w1[y];
                    int y0 = ay->i0[y], y1 = ay->i1[y];
                    for (int xo = 0; xo < w2; ++xo) {
                        S g = o->grad.at3(c, y, xo);
                        S wx1 = axx->w1[xo];
                        int x0 = axx->i0[xo], x1 = axx->i1[xo];
                        gx.at3(c, y0, x0) += g * (S(1) - wy1) * (S(1) - wx1);
                        gx.at3(c, y0, x1) += g * (S(1) - wy1) * wx1;
                        gx.at3(c, y1, x0) += g * wy1 * (S(1) - wx1);
                        gx.at3(c, y1, x1) += g * wy1 * wx1;
                    }
                }
        };
    });
}

// ---- lookups ----

template <class S>
VarT<S> embedding_row(VarT<S> table, int idx) {
    const auto& tv = table.value();
    if (tv.ndim() != 2 || idx < 0 || idx >= tv.rows())
        throw ShapeError("embedding_row: index " + std::to_string(idx) + " in " +
                         tv.shape_str());
    TensorT<S> v({1, tv.cols()});
    std::copy_n(tv.data.begin() + static_cast<size_t>(idx) * tv.cols(), tv.cols(),
                v.data.begin());
    return VarT<S>::make_op(std::move(v), {table}, [table, idx](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto tn = table.node();
        out.backprop = [o, tn, idx] {
            auto& g = tn->ensure_grad();
            for (int j = 0; j < g.cols(); ++j) g.at2(idx, j) += o->grad.data[j];
        };
    });
}

template <class S>
VarT<S> pick(VarT<S> x, int i, int j) {
    const auto& xv = x.value();
    if (xv.ndim() != 2 || i < 0 || i >= xv.rows() || j < 0 || j >= xv.cols())
        throw ShapeError("pick (" + std::to_string(i) + "," + std::to_string(j) + ") of " +
                         xv.shape_str());
    return VarT<S>::make_op(TensorT<S>::scalar(xv.at2(i, j)), {x}, [x, i, j](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn, i, j] { xn->ensure_grad().at2(i, j) += o->grad.data[0]; };
    });
}

// x {C,h,w} -> {C} at spatial cell (y, xcol)
template <class S>
VarT<S> pick_channels(VarT<S> x, int y, int xcol) {
    const auto& xv = x.value();
    if (xv.ndim() != 3 || y < 0 || y >= xv.dim(1) || xcol < 0 || xcol >= xv.dim(2))
        throw ShapeError("pick_channels (" + std::to_string(y) + "," +
                         std::to_string(xcol) + ") of " + xv.shape_str());
    int c_in = xv.dim(0);
    TensorT<S> v({c_in});
    for (int c = 0; c < c_in; ++c) v.at(c) = xv.at3(c, y, xcol);
    return VarT<S>::make_op(std::move(v), {x}, [x, y, xcol](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto xn = x.node();
        out.backprop = [o, xn, y, xcol] {
            auto& g = xn->ensure_grad();
            for (int c = 0; c < g.dim(0); ++c) g.at3(c, y, xcol) += o->grad.at(c);
        };
    });
}

template <class S>
VarT<S> abs(VarT<S> a) {
    TensorT<S> v = a.value();
    for (auto& x : v.data) x = x < S(0) ? -x : x;
    return VarT<S>::make_op(std::move(v), {a}, [a](NodeT<S>& out) {
        NodeT<S>* o = &out;
        auto an = a.node();
        out.backprop = [o, an] {
            auto& g = an->ensure_grad();
            for (size_t i = 0; i < g.data.size(); ++i) {
                S x = an->value.data[i];
                if (x > S(0))
                    g.data[i] += o->grad.data[i];
                else if (x < S(0))
                    g.data[i] -= o->grad.data[i];
            }
        };
    });
}

// Penalty-reduced focal loss for Gaussian heatmap targets. `p` holds
// probabilities; cells with target 1 are positives, the rest are weighted
// down by (1-t)^beta. Normalized by the positive-cell count.
template <class S>
VarT<S> focal_heatmap(VarT<S> p, const TensorT<S>& target, S alpha = S(2), S beta = S(4)) {
    check_same_shape(p.value(), target, "focal_heatmap");
    constexpr double eps = 1e-7;
    int64_t n_pos = 0;
    for (S t : target.data)
        if (t >= S(1)) ++n_pos;
    if (n_pos == 0) throw ValidationError("focal_heatmap: target has no positive cell");
    double acc = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        double t = target.data[i];
        double pv = std::clamp(static_cast<double>(p.value().data[i]), eps, 1.0 - eps);
        if (t >= 1.0)
            acc -= std::pow(1.0 - pv, static_cast<double>(alpha)) * std::log(pv);
        else
            acc -= std::pow(1.0 - t, static_cast<double>(beta)) *
                   std::pow(pv, static_cast<double>(alpha)) * std::log(1.0 - pv);
    }
    acc /= static_cast<double>(n_pos);
    return VarT<S>::make_op(
        TensorT<S>::scalar(static_cast<S>(acc)), {p},
        [p, target, alpha, beta, n_pos](NodeT<S>& out) {
            NodeT<S>* o = &out;
            auto pn = p.node();
            out.backprop = [o, pn, target, alpha, beta, n_pos] {
                constexpr double eps = 1e-7;
                auto& g = pn->ensure_grad();
                double a = alpha, b = beta;
                double s = o->grad.data[0] / static_cast<double>(n_pos);
                for (size_t i = 0; i < target.data.size(); ++i) {
                    double t = target.data[i];
                    double pv =
                        std::clamp(static_cast<double>(pn->value.data[i]), eps, 1.0 - eps);
                    double d;
                    if (t >= 1.0)
                        d = a * std::pow(1.0 - pv, a - 1.0) * std::log(pv) -
                            std::pow(1.0 - pv, a) / pv;
                    else
                        d = std::pow(1.0 - t, b) *
                            (std::pow(pv, a) / (1.0 - pv) -
                             a * std::pow(pv, a - 1.0) * std::log(1.0 - pv));
                    g.data[i] += static_cast<S>(s * d);
                }
            };
        });
}

// Sum of Huber terms: 0.5 r^2 / delta inside the transition, |r| - 0.5 delta
// outside.
template <class S>
VarT<S> smooth_l1(VarT<S> pred, const TensorT<S>& target, S delta = S(1)) {
    check_same_shape(pred.value(), target, "smooth_l1");
    double acc = 0.0;
    for (size_t i = 0; i < target.data.size(); ++i) {
        double r = pred.value().data[i] - target.data[i];
        double ar = std::abs(r);
        acc += ar < delta ? 0.5 * r * r / delta : ar - 0.5 * delta;
    }
    return VarT<S>::make_op(TensorT<S>::scalar(static_cast<S>(acc)), {pred},
                            [pred, target, delta](NodeT<S>& out) {
                                NodeT<S>* o = &out;
                                auto pn = pred.node();
                                out.backprop = [o, pn, target, delta] {
                                    auto& g = pn->ensure_grad();
                                    S s = o->grad.data[0];
                                    for (size_t i = 0; i < target.data.size(); ++i) {
                                        S r = pn->value.data[i] - target.data[i];
                                        S d = std::abs(r) < delta
                                                  ? r / delta
                                                  : (r > S(0) ? S(1) : S(-1));
                                        g.data[i] += s * d;
                                    }
                                };
                            });
}

// mean over rows of -logp[i, target_i]
template <class S>
VarT<S> nll_mean(VarT<S> logp, const std::vector<int>& targets) {
    const auto& lv = logp.value();
    if (lv.ndim() != 2 || static_cast<int>(targets.size()) != lv.rows())
        throw ShapeError("nll_mean: " + lv.shape_str() + " with " +
                         std::to_string(targets.size()) + " targets");
    for (int i = 0; i < lv.rows(); ++i)
        if (targets[i] < 0 || targets[i] >= lv.cols())
            throw ValidationError("nll_mean: class id " + std::to_string(targets[i]) +
                                  " out of range [0," + std::to_string(lv.cols()) + ")");
    double acc = 0.0;
    for (int i = 0; i < lv.rows(); ++i) acc -= lv.at2(i, targets[i]);
    acc /= lv.rows();
    return VarT<S>::make_op(TensorT<S>::scalar(static_cast<S>(acc)), {logp},
                            [logp, targets](NodeT<S>& out) {
                                NodeT<S>* o = &out;
                                auto ln = logp.node();
                                out.backprop = [o, ln, targets] {
                                    auto& g = ln->ensure_grad();
                                    S s = o->grad.data[0] / static_cast<S>(g.rows());
                                    for (int i = 0; i < g.rows(); ++i)
                                        g.at2(i, targets[i]) -= s;
                                };
                            });
}

}  // namespace ops
}  // namespace usmt

#endif

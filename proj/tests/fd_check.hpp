#ifndef USMT_TESTS_FD_CHECK_HPP
#define USMT_TESTS_FD_CHECK_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "usmt/core/autograd.hpp"

// Central finite-difference gradient check. `forward` must rebuild the graph
// from the given parameters on every call and return a scalar.
namespace usmt_test {

struct FdResult {
    double max_err = 0.0;
    int worst_param = -1;
    int64_t worst_coord = -1;
};

inline FdResult fd_check(std::vector<usmt::VarT<double>*> params,
                         const std::function<usmt::VarT<double>()>& forward,
                         double h = 1e-5) {
    auto loss = forward();
    for (auto* p : params) p->zero_grad();
    loss.backward();
    std::vector<usmt::TensorT<double>> analytic;
    for (auto* p : params) analytic.push_back(p->grad());

    FdResult res;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& val = params[pi]->mutable_value();
        for (int64_t i = 0; i < val.numel(); ++i) {
            double orig = val.at(i);
            val.at(i) = orig + h;
            double f1 = forward().value().item();
            val.at(i) = orig - h;
            double f2 = forward().value().item();
            val.at(i) = orig;
            double numeric = (f1 - f2) / (2.0 * h);
            double a = analytic[pi].at(i);
            double denom = std::max(std::abs(a), std::abs(numeric));
            double err;
            if (denom < 1e-6)
                err = std::abs(a - numeric) < 1e-6 ? 0.0 : std::abs(a - numeric);
            else
                err = std::abs(a - numeric) / denom;
            if (err > res.max_err) {
                res.max_err = err;
                res.worst_param = static_cast<int>(pi);
                res.worst_coord = i;
            }
        }
    }
    return res;
}

}  // namespace usmt_test

#endif

#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "usmt/core/ops.hpp"
#include "usmt/core/rng.hpp"

using usmt::Rng;
using usmt::TensorT;
using usmt::VarT;
using D = double;
using TD = TensorT<double>;
using VD = VarT<double>;
namespace ops = usmt::ops;

namespace {

VD rand_param(Rng& rng, std::vector<int> shape, double std = 1.0) {
    TD t(shape);
    rng.fill_normal(t, 0.0, std);
    return VD::param(std::move(t));
}

}  // namespace

TEST_CASE("tensor basics") {
    TD t({2, 3});
    CHECK(t.numel() == 6);
    t.at2(1, 2) = 5.0;
    CHECK(t.data[5] == 5.0);
    CHECK(t.shape_str() == "(2x3)");
    CHECK_THROWS_AS(TD::from({2, 2}, {1.0, 2.0}), usmt::ShapeError);
}

TEST_CASE("matmul forward matches hand result") {
    auto a = VD::constant(TD::from({2, 2}, {1, 2, 3, 4}));
    auto b = VD::constant(TD::from({2, 2}, {5, 6, 7, 8}));
    auto c = ops::matmul(a, b);
    CHECK(c.value().at2(0, 0) == doctest::Approx(19));
    CHECK(c.value().at2(0, 1) == doctest::Approx(22));
    CHECK(c.value().at2(1, 0) == doctest::Approx(43));
    CHECK(c.value().at2(1, 1) == doctest::Approx(50));
}

TEST_CASE("softmax rows normalizes and is stable") {
    auto x = VD::constant(TD::from({1, 3}, {1000.0, 1000.0, 1000.0}));
    auto y = ops::softmax_rows(x);
    for (int j = 0; j < 3; ++j) CHECK(y.value().at2(0, j) == doctest::Approx(1.0 / 3));
}

TEST_CASE("gradients: elementwise and reductions") {
    Rng rng(1);
    auto a = rand_param(rng, {3, 4});
    auto b = rand_param(rng, {3, 4});
    auto fwd = [&] {
        auto m = ops::mul(a, b);
        auto s = ops::sub(ops::add(a, m), ops::scale(b, 0.5));
        return ops::mean_all(ops::mul(s, s));
    };
    auto r = usmt_test::fd_check({&a, &b}, fwd);
    CHECK(r.max_err < 1e-6);
}

TEST_CASE("gradients: div") {
    Rng rng(2);
    auto a = rand_param(rng, {2, 3});
    auto b = rand_param(rng, {2, 3});
    for (auto& v : b.mutable_value().data) v = 1.5 + std::abs(v);
    auto fwd = [&] { return ops::sum_all(ops::div(a, b)); };
    CHECK(usmt_test::fd_check({&a, &b}, fwd).max_err < 1e-6);
}

TEST_CASE("gradients: matmul chain with transpose") {
    Rng rng(3);
    auto a = rand_param(rng, {3, 4});
    auto b = rand_param(rng, {4, 2});
    auto fwd = [&] {
        auto c = ops::matmul(a, b);
        auto d = ops::matmul(ops::transpose2d(c), c);
        return ops::sum_all(d);
    };
    CHECK(usmt_test::fd_check({&a, &b}, fwd).max_err < 1e-6);
}

TEST_CASE("gradients: activations") {
    Rng rng(4);
    auto a = rand_param(rng, {4, 5});
    auto fwd_relu = [&] { return ops::sum_all(ops::mul(ops::relu(a), a)); };
    CHECK(usmt_test::fd_check({&a}, fwd_relu).max_err < 1e-4);
    auto fwd_gelu = [&] { return ops::sum_all(ops::gelu(a)); };
    CHECK(usmt_test::fd_check({&a}, fwd_gelu).max_err < 1e-6);
    auto fwd_sig = [&] { return ops::sum_all(ops::mul(ops::sigmoid(a), a)); };
    CHECK(usmt_test::fd_check({&a}, fwd_sig).max_err < 1e-6);
}

TEST_CASE("gradients: softmax / log_softmax") {
    Rng rng(5);
    auto a = rand_param(rng, {3, 5});
    auto w = rand_param(rng, {3, 5});
    auto fwd_sm = [&] { return ops::sum_all(ops::mul(ops::softmax_rows(a), w)); };
    CHECK(usmt_test::fd_check({&a, &w}, fwd_sm).max_err < 1e-6);
    auto fwd_lsm = [&] { return ops::sum_all(ops::mul(ops::log_softmax_rows(a), w)); };
    CHECK(usmt_test::fd_check({&a, &w}, fwd_lsm).max_err < 1e-6);
}

TEST_CASE("gradients: layer norm") {
    Rng rng(6);
    auto x = rand_param(rng, {4, 6});
    auto g = rand_param(rng, {6});
    auto b = rand_param(rng, {6});
    auto w = rand_param(rng, {4, 6});
    auto fwd = [&] {
        return ops::sum_all(ops::mul(ops::layer_norm_rows(x, g, b), w));
    };
    CHECK(usmt_test::fd_check({&x, &g, &b}, fwd).max_err < 1e-5);
}

TEST_CASE("gradients: slicing / concatenation / broadcasts") {
    Rng rng(7);
    auto a = rand_param(rng, {4, 6});
    auto b = rand_param(rng, {2, 6});
    auto r = rand_param(rng, {6});
    auto c = rand_param(rng, {4});
    auto fwd = [&] {
        auto s1 = ops::slice_rows(a, 1, 2);
        auto s2 = ops::slice_cols(a, 2, 3);
        auto cat = ops::concat_rows<D>({s1, b});
        auto cat2 = ops::concat_cols<D>({s2, ops::slice_cols(a, 0, 2)});
        auto x = ops::add_row_broadcast(a, r);
        auto y = ops::mul_col_broadcast(x, c);
        auto z = ops::add(ops::sum_all(cat), ops::sum_all(ops::mul(cat2, cat2)));
        return ops::add(z, ops::sum_all(ops::mul(y, y)));
    };
    CHECK(usmt_test::fd_check({&a, &b, &r, &c}, fwd).max_err < 1e-6);
}

TEST_CASE("gradients: repeat_rows / mean_rows / reshape / embedding / pick") {
    Rng rng(8);
    auto t = rand_param(rng, {5, 3});
    auto r = rand_param(rng, {1, 4});
    auto fwd = [&] {
        auto e = ops::embedding_row(t, 2);
        auto rep = ops::repeat_rows(r, 3);
        auto m = ops::mean_rows(rep);
        auto resh = ops::reshape(e, {3, 1});
        auto p = ops::pick(resh, 1, 0);
        return ops::add(ops::add(ops::sum_all(m), p), ops::sum_all(ops::mul(e, e)));
    };
    CHECK(usmt_test::fd_check({&t, &r}, fwd).max_err < 1e-6);
}

TEST_CASE("gradients: conv2d") {
    Rng rng(9);
    auto x = rand_param(rng, {2, 5, 5});
    auto w = rand_param(rng, {3, 2, 3, 3}, 0.5);
    auto b = rand_param(rng, {3});
    auto fwd = [&] {
        auto y = ops::conv2d(x, w, b, 1, 1);
        return ops::sum_all(ops::mul(y, y));
    };
    CHECK(usmt_test::fd_check({&x, &w, &b}, fwd).max_err < 1e-5);

    auto y = ops::conv2d(x, w, b, 1, 1);
    CHECK(y.value().shape == std::vector<int>{3, 5, 5});
    auto y2 = ops::conv2d(x, w, b, 2, 1);
    CHECK(y2.value().shape == std::vector<int>{3, 3, 3});
}

TEST_CASE("conv2d matches direct convolution on a hand case") {
    // 1x3x3 input, single 1x1x2x2 kernel, no padding
    auto x = VD::constant(TD::from({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    auto w = VD::constant(TD::from({1, 1, 2, 2}, {1, 0, 0, 1}));
    auto b = VD::constant(TD::from({1}, {0.5}));
    auto y = ops::conv2d(x, w, b, 1, 0);
    CHECK(y.value().shape == std::vector<int>{1, 2, 2});
    CHECK(y.value().at3(0, 0, 0) == doctest::Approx(1 + 5 + 0.5));
    CHECK(y.value().at3(0, 1, 1) == doctest::Approx(5 + 9 + 0.5));
}

TEST_CASE("gradients: bilinear resize up and down") {
    Rng rng(10);
    auto x = rand_param(rng, {2, 4, 5});
    auto fwd_up = [&] {
        auto y = ops::resize_bilinear(x, 7, 9);
        return ops::sum_all(ops::mul(y, y));
    };
    CHECK(usmt_test::fd_check({&x}, fwd_up).max_err < 1e-6);
    auto fwd_down = [&] {
        auto y = ops::resize_bilinear(x, 2, 3);
        return ops::sum_all(ops::mul(y, y));
    };
    CHECK(usmt_test::fd_check({&x}, fwd_down).max_err < 1e-6);
}

TEST_CASE("bilinear resize is exact on constant input") {
    auto x = VD::constant(TD::full({1, 3, 3}, 2.5));
    auto y = ops::resize_bilinear(x, 9, 6);
    for (double v : y.value().data) CHECK(v == doctest::Approx(2.5));
}

TEST_CASE("gradients: nll_mean and pick_channels") {
    Rng rng(11);
    auto logits = rand_param(rng, {4, 3});
    std::vector<int> targets{0, 2, 1, 1};
    auto fwd = [&] { return ops::nll_mean(ops::log_softmax_rows(logits), targets); };
    CHECK(usmt_test::fd_check({&logits}, fwd).max_err < 1e-6);

    auto x = rand_param(rng, {3, 4, 4});
    auto fwd2 = [&] {
        auto ch = ops::pick_channels(x, 2, 1);
        return ops::sum_all(ops::mul(ch, ch));
    };
    CHECK(usmt_test::fd_check({&x}, fwd2).max_err < 1e-6);
}

TEST_CASE("grad accumulates across separate graphs sharing a parameter") {
    auto p = VD::param(TD::from({1}, {2.0}));
    for (int rep = 0; rep < 3; ++rep) {
        auto loss = ops::mul(p, p);
        loss.backward();
    }
    CHECK(p.grad().data[0] == doctest::Approx(3 * 2 * 2.0));
    p.zero_grad();
    CHECK(p.grad().data[0] == 0.0);
}

TEST_CASE("no-grad mode builds no graph") {
    auto p = VD::param(TD::from({1}, {2.0}));
    {
        usmt::NoGradGuard ng;
        auto y = ops::mul(p, p);
        CHECK_FALSE(y.requires_grad());
    }
    auto y = ops::mul(p, p);
    CHECK(y.requires_grad());
}

TEST_CASE("shape errors are raised") {
    auto a = VD::constant(TD({2, 3}));
    auto b = VD::constant(TD({3, 3}));
    CHECK_THROWS_AS(ops::add(a, b), usmt::ShapeError);
    CHECK_THROWS_AS(ops::matmul(a, a), usmt::ShapeError);
    CHECK_THROWS_AS(ops::slice_rows(a, 1, 5), usmt::ShapeError);
    auto nonscalar = ops::add(a, a);
    CHECK_THROWS_AS(nonscalar.backward(), usmt::ShapeError);
}

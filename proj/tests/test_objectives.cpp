#include <doctest.h>

#include <cmath>

#include "fd_check.hpp"
#include "usmt/core/rng.hpp"
#include "usmt/objectives/losses.hpp"

using usmt::BoundingBox;
using usmt::DetectionTarget;
using usmt::LossWeights;
using usmt::Rng;
using usmt::TensorT;
using usmt::VarT;
namespace loss = usmt::loss;
namespace ops = usmt::ops;
using TD = TensorT<double>;
using VD = VarT<double>;

namespace {

// one-hot probability volume from a mask
TD one_hot_probs(const TensorT<int>& mask, int c) {
    TD p({c, mask.dim(0), mask.dim(1)});
    for (int y = 0; y < mask.dim(0); ++y)
        for (int x = 0; x < mask.dim(1); ++x) p.at3(mask.at2(y, x), y, x) = 1.0;
    return p;
}

}  // namespace

TEST_CASE("dice: perfect one-hot prediction has near-zero loss") {
    TensorT<int> gt({4, 4});
    gt.at2(1, 1) = 1;
    gt.at2(1, 2) = 1;
    gt.at2(2, 1) = 1;
    auto l = loss::dice_loss(VD::constant(one_hot_probs(gt, 2)), gt);
    CHECK(l.value().item() < 1e-5);
    CHECK(l.value().item() >= 0.0);
}

TEST_CASE("dice: half-overlap hand case gives 0.5") {
    // gt foreground = pixels {0,1}; prediction mass 1 on pixels {1,2}
    TensorT<int> gt({1, 4});
    gt.at2(0, 0) = 1;
    gt.at2(0, 1) = 1;
    TD p({2, 1, 4});
    for (int x = 0; x < 4; ++x) p.at3(0, 0, x) = 1.0;
    p.at3(0, 0, 1) = 0.0;
    p.at3(1, 0, 1) = 1.0;
    p.at3(0, 0, 2) = 0.0;
    p.at3(1, 0, 2) = 1.0;
    auto l = loss::dice_loss(VD::constant(p), gt);
    CHECK(l.value().item() == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("dice: all-background prediction against nonempty gt approaches 1") {
    TensorT<int> gt({3, 3});
    gt.at2(0, 0) = 1;
    gt.at2(0, 1) = 1;
    TD p({2, 3, 3});
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) p.at3(0, y, x) = 1.0;
    auto l = loss::dice_loss(VD::constant(p), gt);
    CHECK(l.value().item() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("dice: symmetry for binary one-hot masks") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        TensorT<int> a({5, 5}), b({5, 5});
        for (int i = 0; i < 25; ++i) {
            a.at(i) = rng.uniform() < 0.4 ? 1 : 0;
            b.at(i) = rng.uniform() < 0.4 ? 1 : 0;
        }
        bool a_has = false, b_has = false;
        for (int i = 0; i < 25; ++i) {
            a_has = a_has || a.at(i);
            b_has = b_has || b.at(i);
        }
        if (!a_has || !b_has) continue;
        auto lab = loss::dice_loss(VD::constant(one_hot_probs(a, 2)), b).value().item();
        auto lba = loss::dice_loss(VD::constant(one_hot_probs(b, 2)), a).value().item();
        CHECK(lab == doctest::Approx(lba).epsilon(1e-9));
    }
}

TEST_CASE("dice: shape mismatch and bad ids raise") {
    TensorT<int> gt({2, 2});
    TD p({2, 3, 3});
    CHECK_THROWS_AS(loss::dice_loss(VD::constant(p), gt), usmt::ShapeError);
    TensorT<int> bad({3, 3});
    bad.at2(0, 0) = 7;
    CHECK_THROWS_AS(loss::dice_loss(VD::constant(TD({2, 3, 3})), bad),
                    usmt::ValidationError);
}

TEST_CASE("dice: gradient matches finite differences") {
    Rng rng(2);
    TensorT<int> gt({3, 3});
    gt.at2(1, 1) = 1;
    gt.at2(1, 2) = 1;
    auto logits = VD::param([&] {
        TD t({2, 9});
        Rng r(3);
        r.fill_normal(t, 0.0, 1.0);
        return t;
    }());
    auto fwd = [&] {
        auto probs = ops::transpose2d(ops::softmax_rows(ops::transpose2d(logits)));
        return loss::dice_loss(ops::reshape(probs, {2, 3, 3}), gt);
    };
    CHECK(usmt_test::fd_check({&logits}, fwd).max_err < 1e-3);
}

TEST_CASE("cross entropy: uniform logits, hand case, saturation, errors") {
    auto uniform = VD::constant(TD({5}));
    CHECK(loss::cross_entropy_loss(uniform, 2).value().item() ==
          doctest::Approx(std::log(5.0)));

    auto two = VD::constant(TD::from({2}, {1.0, 0.0}));
    CHECK(loss::cross_entropy_loss(two, 0).value().item() ==
          doctest::Approx(0.31326168751822286).epsilon(1e-9));

    auto sat = VD::constant(TD::from({2}, {50.0, 0.0}));
    CHECK(loss::cross_entropy_loss(sat, 0).value().item() < 1e-9);

    CHECK_THROWS_AS(loss::cross_entropy_loss(two, 5), usmt::ValidationError);
    auto single = VD::constant(TD({1}));
    CHECK_THROWS_AS(loss::cross_entropy_loss(single, 0), usmt::ConfigError);
}

TEST_CASE("cross entropy: gradient matches finite differences") {
    auto logits = VD::param(TD::from({4}, {0.3, -0.7, 1.2, 0.1}));
    auto fwd = [&] { return loss::cross_entropy_loss(logits, 2); };
    CHECK(usmt_test::fd_check({&logits}, fwd).max_err < 1e-6);
}

TEST_CASE("l1 loss: identity, arithmetic, batch mean") {
    auto p = VD::constant(TD::scalar(5.0));
    CHECK(loss::l1_loss(p, 5.0).value().item() == 0.0);
    auto p2 = VD::constant(TD::scalar(3.0));
    CHECK(loss::l1_loss(p2, 5.0).value().item() == doctest::Approx(2.0));
    // batch mean of absolute errors (1, 3) -> 2
    auto a = loss::l1_loss(VD::constant(TD::scalar(1.0)), 2.0);
    auto b = loss::l1_loss(VD::constant(TD::scalar(5.0)), 2.0);
    auto mean = ops::scale(ops::add(a, b), 0.5);
    CHECK(mean.value().item() == doctest::Approx(2.0));
}

TEST_CASE("smooth l1: piecewise values from the transition point") {
    auto r_small = VD::constant(TD::from({4}, {0.2, 0.0, 0.0, 0.0}));
    TD target({4});
    CHECK(ops::smooth_l1(r_small, target).value().item() == doctest::Approx(0.02));
    auto r_big = VD::constant(TD::from({1}, {2.0}));
    TD t1({1});
    CHECK(ops::smooth_l1(r_big, t1).value().item() == doctest::Approx(1.5));
}

TEST_CASE("detection loss: perfect prediction is below 1e-3") {
    BoundingBox gt{0.52, 0.48, 0.3, 0.25};
    auto target = usmt::detect_encode(gt, 7, 7);
    TD heat({7, 7});
    heat.at2(target.cell_y, target.cell_x) = 1.0;
    TD box({4, 7, 7});
    box.at3(0, target.cell_y, target.cell_x) = target.dx;
    box.at3(1, target.cell_y, target.cell_x) = target.dy;
    box.at3(2, target.cell_y, target.cell_x) = target.bw;
    box.at3(3, target.cell_y, target.cell_x) = target.bh;
    auto l = loss::detection_loss(VD::constant(heat), VD::constant(box), target);
    CHECK(l.value().item() < 1e-3);
    CHECK(l.value().item() >= 0.0);
}

TEST_CASE("detection loss: focal term falls as the peak prediction rises") {
    BoundingBox gt{0.5, 0.5, 0.4, 0.4};
    auto target = usmt::detect_encode(gt, 5, 5);
    double prev = 1e30;
    for (double p : {0.3, 0.6, 0.9, 0.99}) {
        TD heat = target.heatmap;  // non-peak cells at their target values
        heat.at2(target.cell_y, target.cell_x) = p;
        for (int i = 0; i < 25; ++i)
            if (i != target.cell_y * 5 + target.cell_x) heat.at(i) = 0.0;
        auto l = ops::focal_heatmap(VD::constant(heat), target.heatmap);
        CHECK(l.value().item() < prev);
        prev = l.value().item();
    }
    CHECK(prev < 1e-3);
}

TEST_CASE("detection loss: gradients of focal and smooth l1 match finite differences") {
    BoundingBox gt{0.5, 0.45, 0.35, 0.4};
    auto target = usmt::detect_encode(gt, 4, 4);
    auto heat_logits = VD::param([&] {
        TD t({4, 4});
        Rng r(5);
        r.fill_normal(t, 0.0, 1.0);
        return t;
    }());
    auto box_logits = VD::param([&] {
        TD t({4, 4, 4});
        Rng r(6);
        r.fill_normal(t, 0.0, 1.0);
        return t;
    }());
    auto fwd = [&] {
        return loss::detection_loss(ops::sigmoid(heat_logits), ops::sigmoid(box_logits),
                                    target);
    };
    CHECK(usmt_test::fd_check({&heat_logits, &box_logits}, fwd).max_err < 1e-3);
}

TEST_CASE("detection loss: missing target cell raises") {
    BoundingBox gt{0.5, 0.5, 0.3, 0.3};
    auto target = usmt::detect_encode(gt, 7, 7);
    target.cell_x = 12;  // outside a 7x7 grid
    CHECK_THROWS_AS(
        loss::detection_loss(VD::constant(TD({7, 7})), VD::constant(TD({4, 7, 7})), target),
        usmt::ValidationError);
}

TEST_CASE("multi task loss: weighting, reduction, empty set") {
    LossWeights unit;
    std::map<std::string, double> losses{{"a", 0.5}, {"b", 0.3}};
    CHECK(loss::multi_task_loss(losses, unit) == doctest::Approx(0.8));

    LossWeights weighted;
    weighted.lambda = {{"a", 2.0}, {"b", 0.0}};
    CHECK(loss::multi_task_loss(losses, weighted) == doctest::Approx(1.0));

    std::map<std::string, double> single{{"a", 0.37}};
    CHECK(loss::multi_task_loss(single, unit) == doctest::Approx(0.37));

    std::map<std::string, double> empty;
    CHECK_THROWS_AS(loss::multi_task_loss(empty, unit), usmt::ValidationError);
}

TEST_CASE("multi task loss: linear in each per-task loss and in lambda") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        double la = rng.uniform(0.0, 3.0), lb = rng.uniform(0.0, 3.0);
        double wa = rng.uniform(0.0, 2.0), wb = rng.uniform(0.0, 2.0);
        double c = rng.uniform(0.5, 4.0);
        LossWeights w;
        w.lambda = {{"a", wa}, {"b", wb}};
        double base = loss::multi_task_loss({{"a", la}, {"b", lb}}, w);
        double scaled_loss = loss::multi_task_loss({{"a", c * la}, {"b", lb}}, w);
        CHECK(scaled_loss - base == doctest::Approx((c - 1) * wa * la).epsilon(1e-9));
        LossWeights w2;
        w2.lambda = {{"a", c * wa}, {"b", wb}};
        double scaled_w = loss::multi_task_loss({{"a", la}, {"b", lb}}, w2);
        CHECK(scaled_w - base == doctest::Approx((c - 1) * wa * la).epsilon(1e-9));
    }
}

TEST_CASE("losses are nonnegative on random valid inputs") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        TD logits({3});
        rng.fill_normal(logits, 0.0, 2.0);
        CHECK(loss::cross_entropy_loss(VD::constant(logits),
                                       static_cast<int>(rng.uniform_int(0, 2)))
                  .value()
                  .item() >= 0.0);
        TD pred = TD::scalar(rng.normal(0.0, 5.0));
        CHECK(loss::l1_loss(VD::constant(pred), rng.normal(0.0, 5.0)).value().item() >= 0.0);
    }
}

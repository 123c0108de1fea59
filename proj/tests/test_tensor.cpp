#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mulcon/gradcheck.hpp"
#include "mulcon/ops.hpp"
#include "mulcon/optim.hpp"
#include "mulcon/rng.hpp"
#include "oracles.hpp"

using namespace mulcon;

TEST_CASE("matmul basics") {
    auto a = Tensor::from({1, 1}, {2.0});
    auto b = Tensor::from({1, 1}, {3.0});
    CHECK(matmul(a, b)->item() == 6.0);

    // A * I == A
    Rng rng(11);
    auto m = oracle::rand_tensor({3, 3}, rng, -2, 2, false);
    auto eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye->data[i * 3 + i] = 1.0;
    auto prod = matmul(m, eye);
    CHECK(oracle::max_abs_diff(prod->data, m->data) == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
    Rng rng(42);
    for (int rep = 0; rep < 20; ++rep) {
        auto a = oracle::rand_tensor({3, 4}, rng, -2, 2, false);
        auto b = oracle::rand_tensor({4, 2}, rng, -2, 2, false);
        auto c = matmul(a, b);
        auto ref = oracle::mm_naive(a->data, b->data, 3, 4, 2);
        CHECK(oracle::max_abs_diff(c->data, ref) < 1e-12);
    }
}

TEST_CASE("matmul shape errors") {
    auto a = Tensor::zeros({2, 3});
    auto b = Tensor::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("softmax_rows values and stability") {
    auto x = Tensor::from({1, 2}, {0.0, 0.0});
    auto y = softmax_rows(x);
    CHECK(y->data[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(y->data[1] == doctest::Approx(0.5).epsilon(1e-15));

    auto big = Tensor::from({1, 2}, {1000.0, 0.0});
    auto yb = softmax_rows(big);
    CHECK(std::isfinite(yb->data[0]));
    CHECK(yb->data[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(yb->data[1] < 1e-300);

    auto r = Tensor::from({1, 3}, {1.0, 2.0, 3.0});
    auto yr = softmax_rows(r);
    auto ref = oracle::softmax_row_ld({1.0, 2.0, 3.0});
    CHECK(oracle::max_abs_diff(yr->data, ref) < 1e-12);
}

TEST_CASE("softmax_rows rows sum to one") {
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        auto x = oracle::rand_tensor({4, 6}, rng, -30, 30, false);
        auto y = softmax_rows(x);
        for (int i = 0; i < 4; ++i) {
            double s = 0.0;
            for (int j = 0; j < 6; ++j) {
                double v = y->data[i * 6 + j];
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                s += v;
            }
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("elementwise basics") {
    CHECK(sigmoid(Tensor::from({1}, {0.0}))->item() == 0.5);
    auto r = relu(Tensor::from({2}, {-1.0, 2.0}));
    CHECK(r->data[0] == 0.0);
    CHECK(r->data[1] == 2.0);
    CHECK_THROWS_AS((void)mulcon::log(Tensor::from({1}, {-1.0})), std::domain_error);
    CHECK_THROWS_AS((void)mulcon::log(Tensor::from({1}, {0.0})), std::domain_error);
}

TEST_CASE("backward basics") {
    auto x = Tensor::from({3}, {1.0, -2.0, 0.5}, true);
    auto loss = sum_all(x);
    backward(loss);
    for (double g : x->grad) CHECK(g == 1.0);

    auto x2 = Tensor::from({2}, {1.0, 2.0}, true);
    backward(sum_all(mul(x2, x2)));
    CHECK(x2->grad[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(x2->grad[1] == doctest::Approx(4.0).epsilon(1e-15));

    // repeated backward without zeroing accumulates
    auto x3 = Tensor::from({2}, {1.0, 1.0}, true);
    auto l3 = sum_all(x3);
    backward(l3);
    backward(l3);
    CHECK(x3->grad[0] == 2.0);

    // errors
    auto nx = Tensor::from({2}, {1.0, 1.0}, true);
    CHECK_THROWS_AS(backward(add(nx, nx)), std::invalid_argument);  // non-scalar
    auto off = Tensor::from({1}, {1.0});                            // no grad anywhere
    CHECK_THROWS_AS(backward(sum_all(off)), std::invalid_argument);
}

TEST_CASE("backward determinism after zeroing") {
    Rng rng(3);
    auto x = oracle::rand_tensor({4, 4}, rng);
    auto w = oracle::rand_tensor({4, 4}, rng);
    auto run = [&] {
        x->zero_grad();
        w->zero_grad();
        backward(sum_all(sigmoid(matmul(x, w))));
        auto g = x->grad;
        g.insert(g.end(), w->grad.begin(), w->grad.end());
        return g;
    };
    auto g1 = run();
    auto g2 = run();
    CHECK(g1 == g2);  // bitwise
}

TEST_CASE("per-op gradients match finite differences") {
    Rng rng(1234);
    const double tol = kGradCheckTolerance;

    for (int rep = 0; rep < 20; ++rep) {
        uint64_t s = derive_seed(55, rep);
        Rng r(s);

        auto a = oracle::rand_tensor({3, 4}, r);
        auto b = oracle::rand_tensor({3, 4}, r);
        CHECK(max_rel_grad_error([&] { return add(a, b); }, {a, b}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return mul(a, b); }, {a, b}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return affine(a, 1.7, -0.3); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return sigmoid(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return mulcon::exp(scale(a, 0.5)); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return softmax_rows(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return sum_all(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return mean_all(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return row_sum(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return mean_rows(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return transpose(a); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return reshape(a, {4, 3}); }, {a}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return l2_normalize_rows(a); }, {a}, 1e-5, -1, s) < tol);

        auto relu_in = oracle::rand_tensor_away_from({3, 4}, r, 0.0, 1e-3);
        CHECK(max_rel_grad_error([&] { return relu(relu_in); }, {relu_in}, 1e-5, -1, s) < tol);

        auto pos = oracle::rand_tensor({3, 4}, r, 0.05, 2.0);
        CHECK(max_rel_grad_error([&] { return mulcon::log(pos); }, {pos}, 1e-5, -1, s) < tol);

        auto cl = oracle::rand_tensor({3, 4}, r);
        for (double& v : cl->data)  // keep away from the clamp edges
            if (std::abs(std::abs(v) - 1.0) < 1e-3) v *= 0.9;
        CHECK(max_rel_grad_error([&] { return clamp(cl, -1.0, 1.0); }, {cl}, 1e-5, -1, s) < tol);

        auto m1 = oracle::rand_tensor({3, 5}, r);
        auto m2 = oracle::rand_tensor({5, 2}, r);
        CHECK(max_rel_grad_error([&] { return matmul(m1, m2); }, {m1, m2}, 1e-5, -1, s) < tol);

        auto sq = oracle::rand_tensor({4, 4}, r);
        CHECK(max_rel_grad_error([&] { return take_diag(sq); }, {sq}, 1e-5, -1, s) < tol);

        auto bias = oracle::rand_tensor({4}, r);
        CHECK(max_rel_grad_error([&] { return add_rowvec(a, bias); }, {a, bias}, 1e-5, -1, s) < tol);

        auto p1 = oracle::rand_tensor({2, 3}, r);
        auto p2 = oracle::rand_tensor({2, 2}, r);
        CHECK(max_rel_grad_error([&] { return concat_cols({p1, p2}); }, {p1, p2}, 1e-5, -1, s) < tol);
        auto q1 = oracle::rand_tensor({2, 3}, r);
        auto q2 = oracle::rand_tensor({1, 3}, r);
        CHECK(max_rel_grad_error([&] { return concat_rows({q1, q2}); }, {q1, q2}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return stack0({p1, q1}); }, {p1, q1}, 1e-5, -1, s) < tol);

        auto t3 = oracle::rand_tensor({2, 3, 2}, r);
        CHECK(max_rel_grad_error([&] { return select0(t3, 1); }, {t3}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return select1(t3, 2); }, {t3}, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return gather_rows(a, {2, 0, 2}); }, {a}, 1e-5, -1, s) < tol);
    }
    (void)rng;
}

TEST_CASE("conv2d counting cases") {
    // 1x1 kernel of value 1 reproduces the input
    Rng rng(5);
    auto x = oracle::rand_tensor({1, 1, 3, 3}, rng, 0, 1, false);
    auto w = Tensor::from({1, 1, 1, 1}, {1.0});
    auto y = conv2d(x, w, 1, 0);
    CHECK(oracle::max_abs_diff(y->data, x->data) == 0.0);

    // all-ones 4x4 input, all-ones 2x2 kernel, stride 2 -> 2x2 of 4s
    auto xo = Tensor::full({1, 1, 4, 4}, 1.0);
    auto wo = Tensor::full({1, 1, 2, 2}, 1.0);
    auto yo = conv2d(xo, wo, 2, 0);
    CHECK(yo->shape == Shape{1, 1, 2, 2});
    for (double v : yo->data) CHECK(v == 4.0);
}

TEST_CASE("conv2d matches nested-loop oracle") {
    Rng rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = oracle::rand_tensor({2, 3, 6, 5}, rng, -2, 2, false);
        auto w = oracle::rand_tensor({4, 3, 3, 3}, rng, -1, 1, false);
        for (int stride : {1, 2})
            for (int pad : {0, 1}) {
                auto y = conv2d(x, w, stride, pad);
                int ho, wo;
                auto ref = oracle::conv2d_naive(x->data, 2, 3, 6, 5, w->data, 4, 3, 3, stride, pad, ho, wo);
                CHECK(y->shape == Shape{2, 4, ho, wo});
                CHECK(oracle::max_abs_diff(y->data, ref) < 1e-10);
            }
    }
}

TEST_CASE("conv2d and pooling gradients") {
    Rng rng(88);
    const double tol = kGradCheckTolerance;
    for (int rep = 0; rep < 5; ++rep) {
        uint64_t s = derive_seed(88, rep);
        Rng r(s);
        auto x = oracle::rand_tensor({1, 2, 5, 5}, r);
        auto w = oracle::rand_tensor({3, 2, 3, 3}, r, -1, 1);
        CHECK(max_rel_grad_error([&] { return conv2d(x, w, 2, 1); }, {x, w}, 1e-5, -1, s) < tol);
        auto b = oracle::rand_tensor({3}, r);
        CHECK(max_rel_grad_error([&] { return add_channel_bias(conv2d(x, w, 1, 0), b); }, {x, w, b},
                                 1e-5, -1, s) < tol);
        auto px = oracle::rand_tensor({1, 1, 4, 4}, r);
        CHECK(max_rel_grad_error([&] { return max_pool2d(px, 2, 2); }, {px}, 1e-5, -1, s) < tol);
        auto hx = oracle::rand_tensor({2, 3, 2, 2}, r);
        CHECK(max_rel_grad_error([&] { return nhwc_to_nchw(hx); }, {hx}, 1e-5, -1, s) < tol);
    }
}

TEST_CASE("conv2d shape errors") {
    auto x = Tensor::zeros({1, 2, 4, 4});
    auto w = Tensor::zeros({1, 3, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w, 1, 0), std::invalid_argument);
}

TEST_CASE("matmul and conv are bit-identical across runs") {
    Rng rng(9);
    auto a = oracle::rand_tensor({7, 9}, rng, -3, 3, false);
    auto b = oracle::rand_tensor({9, 5}, rng, -3, 3, false);
    auto c1 = matmul(a, b);
    auto c2 = matmul(a, b);
    CHECK(c1->data == c2->data);

    auto x = oracle::rand_tensor({2, 3, 8, 8}, rng, -1, 1, false);
    auto w = oracle::rand_tensor({4, 3, 3, 3}, rng, -1, 1, false);
    CHECK(conv2d(x, w, 2, 1)->data == conv2d(x, w, 2, 1)->data);
}

TEST_CASE("sgd step basics") {
    auto p = Tensor::from({1}, {0.0}, true);
    p->grad[0] = 1.0;
    std::vector<TensorPtr> params{p};
    OptimizerConfig cfg;
    cfg.kind = OptKind::Sgd;
    cfg.lr = 0.1;
    cfg.momentum = 0.0;
    auto st = init_optimizer(cfg, params);
    sgd_step(params, st);
    CHECK(p->data[0] == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("adam first-step magnitude is about lr") {
    for (double g : {0.3, -1.7, 42.0}) {
        auto p = Tensor::from({1}, {1.0}, true);
        p->grad[0] = g;
        std::vector<TensorPtr> params{p};
        OptimizerConfig cfg;
        cfg.kind = OptKind::Adam;
        cfg.lr = 1e-3;
        auto st = init_optimizer(cfg, params);
        adam_step(params, st);
        double update = 1.0 - p->data[0];
        CHECK(std::abs(update - std::copysign(cfg.lr, g)) < 1e-5);
    }
}

TEST_CASE("optimizer trajectories match scalar oracles") {
    Rng rng(31);
    // five steps, three parameters, fabricated gradient sequences
    std::vector<std::vector<double>> grads(5);
    for (auto& g : grads) {
        g.resize(3);
        for (double& v : g) v = rng.uniform(-1, 1);
    }

    SUBCASE("adam") {
        auto p = Tensor::from({3}, {0.4, -0.2, 1.1}, true);
        std::vector<TensorPtr> params{p};
        OptimizerConfig cfg;
        cfg.kind = OptKind::Adam;
        cfg.lr = 0.05;
        cfg.weight_decay = 1e-4;
        auto st = init_optimizer(cfg, params);
        std::vector<oracle::AdamScalar> ref(3);
        std::vector<double> rp = p->data;
        for (auto& a : ref) a = {cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay};
        for (const auto& g : grads) {
            for (int i = 0; i < 3; ++i) p->grad[i] = g[i];
            adam_step(params, st);
            for (int i = 0; i < 3; ++i) rp[i] = ref[i].step(rp[i], g[i]);
        }
        CHECK(oracle::max_abs_diff(p->data, rp) < 1e-10);
    }

    SUBCASE("sgd with momentum and weight decay") {
        auto p = Tensor::from({3}, {0.4, -0.2, 1.1}, true);
        std::vector<TensorPtr> params{p};
        OptimizerConfig cfg;
        cfg.kind = OptKind::Sgd;
        cfg.lr = 0.01;
        cfg.momentum = 0.9;
        cfg.weight_decay = 1e-4;
        auto st = init_optimizer(cfg, params);
        std::vector<oracle::SgdScalar> ref(3);
        std::vector<double> rp = p->data;
        for (auto& a : ref) a = {cfg.lr, cfg.momentum, cfg.weight_decay};
        for (const auto& g : grads) {
            for (int i = 0; i < 3; ++i) p->grad[i] = g[i];
            sgd_step(params, st);
            for (int i = 0; i < 3; ++i) rp[i] = ref[i].step(rp[i], g[i]);
        }
        CHECK(oracle::max_abs_diff(p->data, rp) < 1e-10);
    }
}

TEST_CASE("optimizer rejects missing gradients") {
    auto p = Tensor::from({1}, {0.0});  // no grad buffer
    std::vector<TensorPtr> params{p};
    OptimizerConfig cfg;
    auto st = init_optimizer(cfg, params);
    CHECK_THROWS_AS(sgd_step(params, st), std::invalid_argument);
}

TEST_CASE("step-decay schedule") {
    // lr0 0.01, factor 0.1, period 20 epochs
    auto s = step_decay(0.01, 0.1, 20, 10, 600);
    CHECK(lr_at(s, 0) == doctest::Approx(0.01).epsilon(1e-12));
    CHECK(lr_at(s, 20 * 10) == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(lr_at(s, 40 * 10) == doctest::Approx(0.0001).epsilon(1e-12));
    CHECK(lr_at(s, 19 * 10 + 9) == doctest::Approx(0.01).epsilon(1e-12));
}

TEST_CASE("one-cycle schedule") {
    auto s = one_cycle(2e-4, 1000);
    long peak = static_cast<long>(0.3 * 1000);
    CHECK(lr_at(s, peak) == doctest::Approx(2e-4).epsilon(1e-15));
    CHECK(lr_at(s, 0) == doctest::Approx(2e-4 / 25.0).epsilon(1e-15));
    CHECK(lr_at(s, 999) == doctest::Approx(2e-4 / 1e4).epsilon(1e-9));
    for (long t = 0; t < 1000; ++t) CHECK(lr_at(s, t) > 0.0);
    CHECK_THROWS_AS(lr_at(s, 1000), std::out_of_range);
    CHECK_THROWS_AS(lr_at(s, -1), std::out_of_range);
}

TEST_CASE("round_to_f32 is idempotent") {
    Rng rng(17);
    auto t = oracle::rand_tensor({8}, rng, -5, 5, false);
    t->round_to_f32();
    auto once = t->data;
    t->round_to_f32();
    CHECK(t->data == once);
    for (double v : t->data) CHECK(static_cast<double>(static_cast<float>(v)) == v);
}

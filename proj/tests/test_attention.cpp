#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mulcon/attention.hpp"
#include "mulcon/gradcheck.hpp"
#include "mulcon/ops.hpp"
#include "mulcon/rng.hpp"
#include "oracles.hpp"

using namespace mulcon;

namespace {

using oracle::multi_att_naive;
const auto block_naive = oracle::multi_att_block_naive;

MultiHeadParams identity_params(int c, bool scaled) {
    MultiHeadParams p;
    p.heads = 1;
    p.scaled = scaled;
    auto eye = Tensor::zeros({c, c});
    for (int i = 0; i < c; ++i) eye->data[i * c + i] = 1.0;
    p.wq = {eye};
    p.wk = {eye};
    p.wv = {eye};
    p.wo = eye;
    p.wqr = Tensor::zeros({c, c});
    return p;
}

}  // namespace

TEST_CASE("att with a single key-value row returns that row") {
    Rng rng(1);
    auto q = oracle::rand_tensor({3, 4}, rng, -2, 2, false);
    auto k = oracle::rand_tensor({1, 4}, rng, -2, 2, false);
    auto v = oracle::rand_tensor({1, 5}, rng, -2, 2, false);
    for (bool scaled : {false, true}) {
        auto out = att(q, k, v, scaled);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 5; ++j) CHECK(out->data[i * 5 + j] == v->data[j]);
    }
}

TEST_CASE("att with zero queries averages the values") {
    Rng rng(2);
    auto q = Tensor::zeros({2, 3});
    auto k = oracle::rand_tensor({4, 3}, rng, -2, 2, false);
    auto v = oracle::rand_tensor({4, 5}, rng, -2, 2, false);
    auto out = att(q, k, v, false);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 5; ++j) {
            double mean = 0.0;
            for (int a = 0; a < 4; ++a) mean += v->data[a * 5 + j];
            mean /= 4.0;
            CHECK(std::abs(out->data[i * 5 + j] - mean) < 1e-12);
        }
}

TEST_CASE("att matches the brute-force oracle") {
    Rng rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        auto q = oracle::rand_tensor({2, 3}, rng, -2, 2, false);
        auto k = oracle::rand_tensor({4, 3}, rng, -2, 2, false);
        auto v = oracle::rand_tensor({4, 5}, rng, -2, 2, false);
        for (bool scaled : {false, true}) {
            auto out = att(q, k, v, scaled);
            auto ref = oracle::att_naive(q->data, k->data, v->data, 2, 4, 3, 5, scaled);
            CHECK(oracle::max_abs_diff(out->data, ref) < 1e-10);
        }
    }
}

TEST_CASE("att weight rows sum to one") {
    Rng rng(4);
    for (int rep = 0; rep < 20; ++rep) {
        auto q = oracle::rand_tensor({3, 4}, rng, -3, 3, false);
        auto k = oracle::rand_tensor({5, 4}, rng, -3, 3, false);
        auto v = oracle::rand_tensor({5, 2}, rng, -3, 3, false);
        TensorPtr w;
        att(q, k, v, true, &w);
        REQUIRE(w);
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (int j = 0; j < 5; ++j) s += w->data[i * 5 + j];
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("scaled attention only rescales the logits") {
    Rng rng(5);
    auto q = oracle::rand_tensor({2, 4}, rng, -1, 1, false);
    auto k = oracle::rand_tensor({3, 4}, rng, -1, 1, false);
    auto v = oracle::rand_tensor({3, 2}, rng, -1, 1, false);
    // att(Q,K,V,scaled) == att(Q/sqrt(dq),K,V,unscaled)
    auto qs = scale(q, 1.0 / std::sqrt(4.0));
    auto a1 = att(q, k, v, true);
    auto a2 = att(qs, k, v, false);
    CHECK(oracle::max_abs_diff(a1->data, a2->data) < 1e-14);
}

TEST_CASE("multi_att with identity projections reduces to att") {
    Rng rng(6);
    int c = 4;
    auto q = oracle::rand_tensor({3, c}, rng, -2, 2, false);
    auto k = oracle::rand_tensor({5, c}, rng, -2, 2, false);
    auto v = oracle::rand_tensor({5, c}, rng, -2, 2, false);
    for (bool scaled : {false, true}) {
        auto p = identity_params(c, scaled);
        auto m = multi_att(q, k, v, p);
        auto a = att(q, k, v, scaled);
        CHECK(oracle::max_abs_diff(m->data, a->data) < 1e-10);
    }
}

TEST_CASE("multi_att and block are invariant to joint K/V permutation") {
    Rng rng(7);
    int c = 6, d = 8, nv = 5;
    auto p = init_multi_head(c, d, 2, 99);
    auto q = oracle::rand_tensor({3, c}, rng, -2, 2, false);
    auto k = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
    auto v = oracle::rand_tensor({nv, c}, rng, -2, 2, false);

    std::vector<int> perm{3, 0, 4, 1, 2};
    auto permute_rows = [&](const TensorPtr& t) {
        auto out = Tensor::create(t->shape);
        int cols = t->dim(1);
        for (int i = 0; i < nv; ++i)
            std::copy_n(t->data.data() + perm[i] * cols, cols, out->data.data() + i * cols);
        return out;
    };
    auto kp = permute_rows(k);
    auto vp = permute_rows(v);

    auto m1 = multi_att(q, k, v, p);
    auto m2 = multi_att(q, kp, vp, p);
    CHECK(oracle::max_abs_diff(m1->data, m2->data) < 1e-12);

    auto b1 = multi_att_block(q, k, v, p);
    auto b2 = multi_att_block(q, kp, vp, p);
    CHECK(oracle::max_abs_diff(b1->data, b2->data) < 1e-12);
}

TEST_CASE("multi_att matches per-head composition oracle") {
    Rng rng(8);
    for (int rep = 0; rep < 10; ++rep) {
        int c = 5, d = 6, nq = 3, nv = 4;
        auto p = init_multi_head(c, d, 2, derive_seed(500, rep));
        auto q = oracle::rand_tensor({nq, c}, rng, -2, 2, false);
        auto k = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
        auto v = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
        auto m = multi_att(q, k, v, p);
        auto ref = multi_att_naive(q->data, k->data, v->data, nq, nv, c, p);
        CHECK(oracle::max_abs_diff(m->data, ref) < 1e-10);
    }
}

TEST_CASE("multi_att_block special cases") {
    Rng rng(9);
    int c = 4, d = 6, nq = 2, nv = 3;
    auto q = oracle::rand_tensor({nq, c}, rng, -2, 2, false);
    auto k = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
    auto v = oracle::rand_tensor({nv, c}, rng, -2, 2, false);

    SUBCASE("zero value projections leave only the residual path") {
        auto p = init_multi_head(c, d, 2, 77);
        for (auto& w : p.wv) std::fill(w->data.begin(), w->data.end(), 0.0);
        auto out = multi_att_block(q, k, v, p);
        // Q' = concat(Q Wq_h); expected = Q' + Q' Wqr
        int dh = d / 2;
        std::vector<double> qcat(static_cast<size_t>(nq) * d);
        for (int h = 0; h < 2; ++h) {
            auto qi = oracle::mm_naive(q->data, p.wq[h]->data, nq, c, dh);
            for (int i = 0; i < nq; ++i)
                for (int j = 0; j < dh; ++j) qcat[i * d + h * dh + j] = qi[i * dh + j];
        }
        auto expect = oracle::mm_naive(qcat, p.wqr->data, nq, d, d);
        for (size_t i = 0; i < expect.size(); ++i) expect[i] += qcat[i];
        CHECK(oracle::max_abs_diff(out->data, expect) < 1e-12);
    }

    SUBCASE("zero residual projection returns Q-prime") {
        auto p = init_multi_head(c, d, 2, 78);
        std::fill(p.wqr->data.begin(), p.wqr->data.end(), 0.0);
        auto out = multi_att_block(q, k, v, p);
        auto mattn = multi_att(q, k, v, p);
        int dh = d / 2;
        std::vector<double> qcat(static_cast<size_t>(nq) * d);
        for (int h = 0; h < 2; ++h) {
            auto qi = oracle::mm_naive(q->data, p.wq[h]->data, nq, c, dh);
            for (int i = 0; i < nq; ++i)
                for (int j = 0; j < dh; ++j) qcat[i * d + h * dh + j] = qi[i * dh + j];
        }
        for (size_t i = 0; i < qcat.size(); ++i) qcat[i] += mattn->data[i];
        CHECK(oracle::max_abs_diff(out->data, qcat) < 1e-12);
    }
}

TEST_CASE("multi_att_block matches step-by-step oracle") {
    Rng rng(10);
    for (int rep = 0; rep < 10; ++rep) {
        int c = 5, d = 6, nq = 3, nv = 4;
        auto p = init_multi_head(c, d, 3, derive_seed(900, rep));
        auto q = oracle::rand_tensor({nq, c}, rng, -2, 2, false);
        auto k = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
        auto v = oracle::rand_tensor({nv, c}, rng, -2, 2, false);
        auto out = multi_att_block(q, k, v, p);
        auto ref = block_naive(q->data, k->data, v->data, nq, nv, c, p);
        CHECK(oracle::max_abs_diff(out->data, ref) < 1e-10);
    }
}

TEST_CASE("attention gradients pass finite differences") {
    const double tol = kGradCheckTolerance;
    for (int rep = 0; rep < 5; ++rep) {
        uint64_t s = derive_seed(321, rep);
        Rng r(s);
        auto q = oracle::rand_tensor({2, 4}, r);
        auto k = oracle::rand_tensor({3, 4}, r);
        auto v = oracle::rand_tensor({3, 5}, r);
        for (bool scaled : {false, true})
            CHECK(max_rel_grad_error([&] { return att(q, k, v, scaled); }, {q, k, v}, 1e-5, -1, s) < tol);

        int c = 4, d = 6;
        auto p = init_multi_head(c, d, 2, derive_seed(s, 1));
        auto q2 = oracle::rand_tensor({2, c}, r);
        auto k2 = oracle::rand_tensor({3, c}, r);
        auto v2 = oracle::rand_tensor({3, c}, r);
        std::vector<TensorPtr> leaves{q2, k2, v2};
        for (auto& [name, t] : named_params(p, "attn")) {
            (void)name;
            leaves.push_back(t);
        }
        CHECK(max_rel_grad_error([&] { return multi_att(q2, k2, v2, p); }, leaves, 1e-5, -1, s) < tol);
        CHECK(max_rel_grad_error([&] { return multi_att_block(q2, k2, v2, p); }, leaves, 1e-5, -1, s) <
              tol);
    }
}

TEST_CASE("attention shape errors") {
    auto q = Tensor::zeros({2, 3});
    auto k = Tensor::zeros({4, 5});
    auto v = Tensor::zeros({4, 2});
    CHECK_THROWS_AS(att(q, k, v, false), std::invalid_argument);
    auto k2 = Tensor::zeros({4, 3});
    auto v2 = Tensor::zeros({3, 2});
    CHECK_THROWS_AS(att(q, k2, v2, false), std::invalid_argument);
    CHECK_THROWS_AS(init_multi_head(4, 6, 4, 1), std::invalid_argument);  // 6 % 4 != 0
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "san/layers.hpp"
#include "support/gradcheck.hpp"

using namespace san;
using san_test::max_grad_rel_err;
using san_test::random_leaf;

TEST_CASE("ffn with identity weights is relu passthrough") {
    Graph g;
    FfnParams p;
    p.w1 = g.constant({2, 2}, {1, 0, 0, 1});
    p.b1 = g.constant({2}, {0, 0});
    p.w2 = g.constant({2, 2}, {1, 0, 0, 1});
    p.b2 = g.constant({2}, {0, 0});
    Tensor x = g.constant({2, 1}, {-1, 2});
    CHECK(ffn_forward(g, p, x).value() == std::vector<double>{0, 2});
}

TEST_CASE("ffn is position-wise: column permutation commutes") {
    Graph g;
    Rng rng(5);
    ParamSet ps;
    FfnParams p = make_ffn(g, ps, "ffn", 3, 4, 2, rng);
    Tensor x = random_leaf(g, {3, 5}, rng, false);
    Tensor y = ffn_forward(g, p, x);

    // Permute columns 0<->3 of the input and rerun.
    std::vector<double> xp = x.value();
    for (std::size_t r = 0; r < 3; ++r) std::swap(xp[r * 5 + 0], xp[r * 5 + 3]);
    Tensor x2 = g.constant({3, 5}, xp);
    Tensor y2 = ffn_forward(g, p, x2);
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(y(r, 0) == y2(r, 3));
        CHECK(y(r, 3) == y2(r, 0));
        CHECK(y(r, 1) == y2(r, 1));
    }
}

TEST_CASE("ffn gradient") {
    Graph g0;
    Rng rng(7);
    ParamSet ps;
    FfnParams p = make_ffn(g0, ps, "ffn", 3, 4, 2, rng);
    Tensor x = random_leaf(g0, {3, 4}, rng);
    std::vector<Tensor> leaves{p.w1, p.b1, p.w2, p.b2, x};
    double err = max_grad_rel_err(
        [&](Graph& g) { return sum(g, san::tanh(g, ffn_forward(g, p, x))); },
        leaves);
    CHECK(err < 1e-6);
}

TEST_CASE("bilstm single step uses the same input for both directions") {
    Graph g;
    Rng rng(9);
    ParamSet ps;
    LstmLayerParams p = make_bilstm_layer(g, ps, "lstm", 3, 4, rng);
    Tensor x = random_leaf(g, {3, 1}, rng, false);
    Tensor out = bilstm_forward(g, p, x, 1);
    CHECK(out.shape() == Shape{8, 1});

    // With identical weights in both directions the two halves must agree.
    LstmLayerParams shared;
    shared.hidden = 4;
    shared.fwd = p.fwd;
    shared.bwd = p.fwd;
    Tensor out2 = bilstm_forward(g, shared, x, 1);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(out2(i, 0) == doctest::Approx(out2(i + 4, 0)));
}

TEST_CASE("reversing input swaps direction roles when weights swap") {
    Graph g;
    Rng rng(13);
    ParamSet ps;
    LstmLayerParams p = make_bilstm_layer(g, ps, "lstm", 3, 4, rng);
    const std::size_t L = 5;
    Tensor x = random_leaf(g, {3, L}, rng, false);

    LstmLayerParams swapped;
    swapped.hidden = 4;
    swapped.fwd = p.bwd;
    swapped.bwd = p.fwd;

    std::vector<double> xr(x.size());
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t t = 0; t < L; ++t)
            xr[r * L + t] = x(r, L - 1 - t);
    Tensor xrev = g.constant({3, L}, xr);

    Tensor a = bilstm_forward(g, p, x, L);
    Tensor b = bilstm_forward(g, swapped, xrev, L);
    for (std::size_t t = 0; t < L; ++t)
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(a(i, t) == doctest::Approx(b(i + 4, L - 1 - t)));
            CHECK(a(i + 4, t) == doctest::Approx(b(i, L - 1 - t)));
        }
}

TEST_CASE("bilstm gradient on a 3-step sequence") {
    Graph g0;
    Rng rng(17);
    ParamSet ps;
    LstmLayerParams p = make_bilstm_layer(g0, ps, "lstm", 2, 3, rng);
    Tensor x = random_leaf(g0, {2, 3}, rng);
    std::vector<Tensor> leaves{p.fwd.wx, p.fwd.wh, p.fwd.b,
                               p.bwd.wx, p.bwd.wh, p.bwd.b, x};
    double err = max_grad_rel_err(
        [&](Graph& g) { return sum(g, bilstm_forward(g, p, x, 3)); }, leaves);
    CHECK(err < 1e-5);
}

TEST_CASE("bilstm hidden states are bounded by tanh") {
    Graph g;
    Rng rng(19);
    ParamSet ps;
    LstmLayerParams p = make_bilstm_layer(g, ps, "lstm", 3, 4, rng);
    Tensor x = random_leaf(g, {3, 6}, rng, false, -5.0, 5.0);
    Tensor out = bilstm_forward(g, p, x, 6);
    for (double v : out.value()) CHECK(std::fabs(v) < 1.0);
}

TEST_CASE("maxout of x and -x is |x|") {
    Graph g;
    MaxoutParams p;
    p.w.push_back(g.constant({2, 2}, {1, 0, 0, 1}));
    p.b.push_back(g.constant({2}, {0, 0}));
    p.w.push_back(g.constant({2, 2}, {-1, 0, 0, -1}));
    p.b.push_back(g.constant({2}, {0, 0}));
    Tensor x = g.constant({2, 3}, {-1, 2, -3, 4, -5, 6});
    Tensor y = maxout_forward(g, p, x);
    CHECK(y.value() == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("maxout dominates each individual piece") {
    Graph g;
    Rng rng(21);
    ParamSet ps;
    MaxoutParams p = make_maxout(g, ps, "mo", 3, 2, 3, rng);
    Tensor x = random_leaf(g, {3, 4}, rng, false);
    Tensor y = maxout_forward(g, p, x);
    for (std::size_t k = 0; k < 3; ++k) {
        Tensor piece = add_bias(g, matmul(g, p.w[k], x), p.b[k]);
        for (std::size_t i = 0; i < y.size(); ++i)
            CHECK(y.value()[i] >= piece.value()[i]);
    }
}

TEST_CASE("maxout gradient away from ties") {
    Graph g0;
    Rng rng(23);
    ParamSet ps;
    MaxoutParams p = make_maxout(g0, ps, "mo", 3, 2, 2, rng);
    Tensor x = random_leaf(g0, {3, 3}, rng);
    std::vector<Tensor> leaves{p.w[0], p.b[0], p.w[1], p.b[1], x};
    double err = max_grad_rel_err(
        [&](Graph& g) { return sum(g, maxout_forward(g, p, x)); }, leaves);
    CHECK(err < 1e-6);
}

TEST_CASE("gru gate saturation limits") {
    Graph g;
    Rng rng(29);
    ParamSet ps;
    GruParams p = make_gru(g, ps, "gru", 3, rng);
    Tensor s = random_leaf(g, {3, 1}, rng, false);
    Tensor x = random_leaf(g, {3, 1}, rng, false);

    SUBCASE("update gate forced to 1 gives the candidate state") {
        p.b_z.value() = {50, 50, 50};
        Tensor sn = gru_step(g, p, s, x);
        // candidate recomputed by hand
        Tensor r = sigmoid(g, add_bias(g, add(g, matmul(g, p.wx_r, x),
                                              matmul(g, p.wh_r, s)),
                                       p.b_r));
        Tensor cand = san::tanh(
            g, add_bias(g, add(g, matmul(g, p.wx_c, x),
                               matmul(g, p.wh_c, mul(g, r, s))),
                        p.b_c));
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(sn(i, 0) == doctest::Approx(cand(i, 0)).epsilon(1e-9));
    }

    SUBCASE("update gate forced to 0 keeps the previous state") {
        p.b_z.value() = {-50, -50, -50};
        Tensor sn = gru_step(g, p, s, x);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(sn(i, 0) == doctest::Approx(s(i, 0)).epsilon(1e-9));
    }
}

TEST_CASE("gru gradient through 3 chained steps") {
    Graph g0;
    Rng rng(31);
    ParamSet ps;
    GruParams p = make_gru(g0, ps, "gru", 3, rng);
    Tensor s0 = random_leaf(g0, {3, 1}, rng);
    Tensor x1 = random_leaf(g0, {3, 1}, rng);
    Tensor x2 = random_leaf(g0, {3, 1}, rng);
    Tensor x3 = random_leaf(g0, {3, 1}, rng);
    std::vector<Tensor> leaves{p.wx_z, p.wh_z, p.b_z, p.wx_r, p.wh_r,
                               p.b_r,  p.wx_c, p.wh_c, p.b_c, s0,
                               x1,     x2,     x3};
    double err = max_grad_rel_err(
        [&](Graph& g) {
            Tensor s = gru_step(g, p, s0, x1);
            s = gru_step(g, p, s, x2);
            s = gru_step(g, p, s, x3);
            return sum(g, s);
        },
        leaves);
    CHECK(err < 1e-5);
}

TEST_CASE("attention transform") {
    Graph g;
    Tensor w = g.constant({2, 2}, {1, 0, 0, 1});
    Tensor x = g.constant({2, 2}, {1, 2, 3, 4});
    CHECK(attention_transform(g, w, x).value() ==
          std::vector<double>{1, 2, 3, 4});

    Rng rng(37);
    Tensor wr = random_leaf(g, {3, 4}, rng, false);
    Tensor xr = random_leaf(g, {4, 5}, rng, false);
    Tensor yr = attention_transform(g, wr, xr);
    for (double v : yr.value()) CHECK(v >= 0.0);

    Graph g0;
    Tensor w2 = random_leaf(g0, {3, 4}, rng);
    Tensor x2 = random_leaf(g0, {4, 5}, rng);
    std::vector<Tensor> leaves{w2, x2};
    double err = max_grad_rel_err(
        [&](Graph& gg) { return sum(gg, attention_transform(gg, w2, x2)); },
        leaves);
    CHECK(err < 1e-6);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>

#include "doctest.h"
#include "san/answer.hpp"
#include "support/gradcheck.hpp"

using namespace san;
using san_test::random_leaf;

namespace {

AnswerParams tiny_answer(Graph& g, ParamSet& ps, Rng& rng, std::size_t d = 3,
                         std::size_t steps = 3, double rate = 0.4) {
    return make_answer(g, ps, rng, d, steps, rate);
}

// Plain-double reference of the reasoning recurrence, kept free of engine
// calls so it can serve as an oracle.
struct NaiveAnswer {
    std::size_t d2;  // 2d
    const AnswerParams& p;

    explicit NaiveAnswer(std::size_t d, const AnswerParams& params)
        : d2(2 * d), p(params) {}

    static std::vector<double> softmax(std::vector<double> v) {
        double mx = v[0];
        for (double x : v) mx = std::max(mx, x);
        double denom = 0;
        for (double& x : v) {
            x = std::exp(x - mx);
            denom += x;
        }
        for (double& x : v) x /= denom;
        return v;
    }

    // y = A^T x where A is [r x c] and x has length r.
    static std::vector<double> vecmat(const std::vector<double>& x,
                                      const Tensor& A) {
        const std::size_t r = A.dim(0), c = A.dim(1);
        std::vector<double> y(c, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[j] += x[i] * A(i, j);
        return y;
    }

    static std::vector<double> matvec(const Tensor& A,
                                      const std::vector<double>& x) {
        const std::size_t r = A.dim(0), c = A.dim(1);
        std::vector<double> y(r, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) y[i] += A(i, j) * x[j];
        return y;
    }

    std::vector<double> memory_read(const Tensor& M,
                                    const std::vector<double>& weights) const {
        std::vector<double> x(d2, 0.0);
        for (std::size_t r = 0; r < d2; ++r)
            for (std::size_t j = 0; j < weights.size(); ++j)
                x[r] += weights[j] * M(r, j);
        return x;
    }

    std::vector<double> gru(const std::vector<double>& s,
                            const std::vector<double>& x) const {
        auto gate = [&](const Tensor& wx, const Tensor& wh, const Tensor& b,
                        const std::vector<double>& sv) {
            std::vector<double> out(d2);
            auto a = matvec(wx, x);
            auto c = matvec(wh, sv);
            for (std::size_t i = 0; i < d2; ++i)
                out[i] = a[i] + c[i] + b.value()[i];
            return out;
        };
        auto z = gate(p.gru.wx_z, p.gru.wh_z, p.gru.b_z, s);
        auto r = gate(p.gru.wx_r, p.gru.wh_r, p.gru.b_r, s);
        for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
        for (auto& v : r) v = 1.0 / (1.0 + std::exp(-v));
        std::vector<double> rs(d2);
        for (std::size_t i = 0; i < d2; ++i) rs[i] = r[i] * s[i];
        auto cand = gate(p.gru.wx_c, p.gru.wh_c, p.gru.b_c, rs);
        for (auto& v : cand) v = std::tanh(v);
        std::vector<double> out(d2);
        for (std::size_t i = 0; i < d2; ++i)
            out[i] = (1.0 - z[i]) * s[i] + z[i] * cand[i];
        return out;
    }

    // Begin/end distribution pair from a state.
    std::pair<std::vector<double>, std::vector<double>> predict(
        const std::vector<double>& s, const Tensor& M) const {
        const std::size_t n = M.dim(1);
        auto sw6 = vecmat(s, p.w6);
        std::vector<double> bscore(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t r = 0; r < d2; ++r) bscore[j] += sw6[r] * M(r, j);
        auto pb = softmax(bscore);

        auto read = memory_read(M, pb);
        std::vector<double> joint(s);
        joint.insert(joint.end(), read.begin(), read.end());
        auto jw7 = vecmat(joint, p.w7);
        std::vector<double> escore(n, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t r = 0; r < d2; ++r) escore[j] += jw7[r] * M(r, j);
        return {pb, softmax(escore)};
    }
};

}  // namespace

TEST_CASE("initial state") {
    Graph g;
    Rng rng(3);
    ParamSet ps;
    AnswerParams p = tiny_answer(g, ps, rng);

    SUBCASE("single question column is returned as-is") {
        Tensor hq = random_leaf(g, {6, 1}, rng, false);
        Tensor s0 = initial_state(g, p, hq, 1);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(s0(i, 0) == doctest::Approx(hq(i, 0)));
    }

    SUBCASE("identical columns collapse to that column") {
        std::vector<double> col = san_test::random_values(6, rng);
        std::vector<double> hv(6 * 4);
        for (std::size_t r = 0; r < 6; ++r)
            for (std::size_t j = 0; j < 4; ++j) hv[r * 4 + j] = col[r];
        Tensor hq = g.constant({6, 4}, hv);
        Tensor s0 = initial_state(g, p, hq, 4);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(s0(i, 0) == doctest::Approx(col[i]).epsilon(1e-12));
    }

    SUBCASE("random case matches a naive loop") {
        Tensor hq = random_leaf(g, {6, 3}, rng, false);
        Tensor s0 = initial_state(g, p, hq, 3);

        std::vector<double> scores(3, 0.0);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t r = 0; r < 6; ++r)
                scores[j] += p.w4.value()[r] * hq(r, j);
        auto alpha = NaiveAnswer::softmax(scores);
        for (std::size_t r = 0; r < 6; ++r) {
            double want = 0;
            for (std::size_t j = 0; j < 3; ++j) want += alpha[j] * hq(r, j);
            CHECK(s0(r, 0) == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("reason steps") {
    Graph g;
    Rng rng(5);
    ParamSet ps;
    AnswerParams p = tiny_answer(g, ps, rng);

    SUBCASE("one step emits exactly one pair from s0") {
        Tensor m = random_leaf(g, {6, 4}, rng, false);
        Tensor s0 = random_leaf(g, {6, 1}, rng, false);
        auto steps = reason_steps(g, p, s0, m, 4, 1);
        CHECK(steps.begin.size() == 1);
        CHECK(steps.end.size() == 1);
    }

    SUBCASE("single passage token forces [1.0] everywhere") {
        Tensor m = random_leaf(g, {6, 1}, rng, false);
        Tensor s0 = random_leaf(g, {6, 1}, rng, false);
        auto steps = reason_steps(g, p, s0, m, 1, 3);
        for (std::size_t t = 0; t < 3; ++t) {
            CHECK(steps.begin[t].value() == std::vector<double>{1.0});
            CHECK(steps.end[t].value() == std::vector<double>{1.0});
        }
    }

    SUBCASE("T=3, n=4 matches the naive recomputation") {
        Tensor m = random_leaf(g, {6, 4}, rng, false);
        Tensor s0t = random_leaf(g, {6, 1}, rng, false);
        auto steps = reason_steps(g, p, s0t, m, 4, 3);

        NaiveAnswer ref(3, p);
        std::vector<double> s(s0t.value());
        for (std::size_t t = 0; t < 3; ++t) {
            if (t > 0) {
                auto sw5 = NaiveAnswer::vecmat(s, p.w5);
                std::vector<double> bscore(4, 0.0);
                for (std::size_t j = 0; j < 4; ++j)
                    for (std::size_t r = 0; r < 6; ++r)
                        bscore[j] += sw5[r] * m(r, j);
                auto beta = NaiveAnswer::softmax(bscore);
                auto x = ref.memory_read(m, beta);
                s = ref.gru(s, x);
            }
            auto [pb, pe] = ref.predict(s, m);
            for (std::size_t j = 0; j < 4; ++j) {
                CHECK(steps.begin[t].value()[j] ==
                      doctest::Approx(pb[j]).epsilon(1e-10));
                CHECK(steps.end[t].value()[j] ==
                      doctest::Approx(pe[j]).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("stochastic average") {
    Graph g;

    SUBCASE("evaluation averages all steps") {
        Rng rng(1);
        std::vector<Tensor> dists{g.constant({1, 2}, {0.2, 0.8}),
                                  g.constant({1, 2}, {0.6, 0.4})};
        auto [avg, mask] = stochastic_average(g, dists, 0.4, rng, false);
        CHECK(avg.value()[0] == doctest::Approx(0.4));
        CHECK(avg.value()[1] == doctest::Approx(0.6));
        CHECK(mask == std::vector<bool>{true, true});
    }

    SUBCASE("identical distributions average to themselves under any mask") {
        Rng rng(2);
        std::vector<Tensor> dists(4, g.constant({1, 3}, {0.5, 0.3, 0.2}));
        for (int i = 0; i < 50; ++i) {
            auto [avg, mask] = stochastic_average(g, dists, 0.5, rng, true);
            (void)mask;
            CHECK(avg.value()[0] == doctest::Approx(0.5));
            CHECK(avg.value()[1] == doctest::Approx(0.3));
            CHECK(avg.value()[2] == doctest::Approx(0.2));
            g.reset();
        }
    }

    SUBCASE("mask statistics match the exhaustive enumeration") {
        Rng rng(7);
        const std::size_t T = 5;
        const double rate = 0.4;
        const int draws = 100000;
        std::vector<int> keep_count(T, 0);
        std::map<std::vector<bool>, int> hist;
        for (int i = 0; i < draws; ++i) {
            auto mask = draw_keep_mask(rng, T, rate);
            bool any = false;
            for (std::size_t t = 0; t < T; ++t) {
                if (mask[t]) keep_count[t]++;
                any = any || mask[t];
            }
            REQUIRE(any);  // never all-dropped
            hist[mask]++;
        }
        for (std::size_t t = 0; t < T; ++t) {
            double r = static_cast<double>(keep_count[t]) / draws;
            CHECK(r >= 0.60);
            CHECK(r <= 0.64);
        }

        // Conditional distribution over the 31 legal masks.
        const double keep = 1.0 - rate;
        const double z = 1.0 - std::pow(rate, static_cast<double>(T));
        double tv = 0.0;
        int legal = 0;
        for (int bits = 1; bits < 32; ++bits) {
            std::vector<bool> mask(T);
            int k = 0;
            for (std::size_t t = 0; t < T; ++t) {
                mask[t] = (bits >> t) & 1;
                k += mask[t];
            }
            const double want =
                std::pow(keep, k) * std::pow(rate, static_cast<double>(T - k)) /
                z;
            const double got =
                static_cast<double>(hist.count(mask) ? hist[mask] : 0) / draws;
            tv += std::fabs(want - got);
            ++legal;
        }
        CHECK(legal == 31);
        CHECK(tv / 2.0 < 0.01);
    }
}

TEST_CASE("decode span") {
    SUBCASE("delta distributions") {
        std::vector<double> b{1, 0}, e{0, 1};
        auto s = decode_span(b, e, 15);
        CHECK(s.start == 0);
        CHECK(s.end == 1);
        CHECK(s.score == doctest::Approx(1.0));
    }

    SUBCASE("enumerated three-span case") {
        std::vector<double> b{0.7, 0.3}, e{0.1, 0.9};
        // spans: (0,0)=0.07 (0,1)=0.63 (1,1)=0.27
        auto s = decode_span(b, e, 15);
        CHECK(s.start == 0);
        CHECK(s.end == 1);
        CHECK(s.score == doctest::Approx(0.63));
    }

    SUBCASE("length-one cap reduces to elementwise argmax") {
        std::vector<double> b{0.2, 0.5, 0.3}, e{0.9, 0.05, 0.05};
        auto s = decode_span(b, e, 1);
        CHECK(s.start == s.end);
        CHECK(s.start == 0);  // 0.2*0.9 beats 0.5*0.05
    }

    SUBCASE("positive rescaling leaves the argmax unchanged") {
        Rng rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            auto b = san_test::random_values(6, rng, 0.01, 1.0);
            auto e = san_test::random_values(6, rng, 0.01, 1.0);
            auto s1 = decode_span(b, e, 4);
            for (auto& v : b) v *= 37.5;
            for (auto& v : e) v *= 0.004;
            auto s2 = decode_span(b, e, 4);
            CHECK(s1.start == s2.start);
            CHECK(s1.end == s2.end);
        }
    }
}

TEST_CASE("kbest spans") {
    SUBCASE("K=1 equals decode_span") {
        Rng rng(13);
        auto b = san_test::random_values(5, rng, 0.0, 1.0);
        auto e = san_test::random_values(5, rng, 0.0, 1.0);
        auto top = kbest_spans(b, e, 1, 3);
        auto best = decode_span(b, e, 3);
        REQUIRE(top.size() == 1);
        CHECK(top[0].start == best.start);
        CHECK(top[0].end == best.end);
    }

    SUBCASE("scores are non-increasing and match brute force") {
        Rng rng(17);
        auto b = san_test::random_values(5, rng, 0.0, 1.0);
        auto e = san_test::random_values(5, rng, 0.0, 1.0);
        auto top = kbest_spans(b, e, 4, 15);
        for (std::size_t i = 1; i < top.size(); ++i)
            CHECK(top[i - 1].score >= top[i].score);

        // brute force over all i <= j
        std::vector<DecodedSpan> all;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i; j < 5; ++j)
                all.push_back({i, j, b[i] * e[j]});
        std::sort(all.begin(), all.end(),
                  [](const DecodedSpan& a, const DecodedSpan& bb) {
                      if (a.score != bb.score) return a.score > bb.score;
                      if (a.start != bb.start) return a.start < bb.start;
                      return a.end < bb.end;
                  });
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(top[i].start == all[i].start);
            CHECK(top[i].end == all[i].end);
        }
    }

    SUBCASE("oversized K returns every legal span") {
        std::vector<double> b{0.5, 0.5}, e{0.5, 0.5};
        auto top = kbest_spans(b, e, 100, 15);
        CHECK(top.size() == 3);
    }
}

TEST_CASE("span loss") {
    Graph g;

    SUBCASE("confident correct prediction has near-zero loss") {
        Tensor b = g.constant({1, 2}, {1.0, 0.0});
        Tensor e = g.constant({1, 2}, {0.0, 1.0});
        Tensor loss = span_loss(g, b, e, 0, 1, 2);
        CHECK(loss.scalar() == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("uniform distributions give 2 ln n") {
        const std::size_t n = 7;
        Tensor b = g.constant({1, n}, std::vector<double>(n, 1.0 / n));
        Tensor e = g.constant({1, n}, std::vector<double>(n, 1.0 / n));
        Tensor loss = span_loss(g, b, e, 3, 5, n);
        CHECK(std::fabs(loss.scalar() - 2.0 * std::log(double(n))) <= 1e-9);
    }

    SUBCASE("out-of-range gold raises a data error") {
        Tensor b = g.constant({1, 2}, {0.5, 0.5});
        CHECK_THROWS_AS(span_loss(g, b, b, 2, 0, 2), DataError);
    }

    SUBCASE("gradient through stochastic averaging with a fixed mask") {
        Graph g0(21);
        Rng rng(19);
        ParamSet ps;
        AnswerParams p = tiny_answer(g0, ps, rng, 2, 3, 0.4);
        Tensor m = random_leaf(g0, {4, 4}, rng);
        Tensor hq = random_leaf(g0, {4, 2}, rng);
        std::vector<Tensor> leaves{p.w4, p.w5, p.w6, p.w7, m, hq};

        double err = san_test::max_grad_rel_err(
            [&](Graph& g2) {
                Tensor s0 = initial_state(g2, p, hq, 2);
                auto steps = reason_steps(g2, p, s0, m, 4, 3);
                auto [ab, mask] =
                    stochastic_average(g2, steps.begin, 0.4, g2.rng(), true);
                Tensor ae = average_with_mask(g2, steps.end, mask);
                return span_loss(g2, ab, ae, 1, 2, 4);
            },
            leaves, 1e-5, /*graph_seed=*/21, /*training=*/true);
        CHECK(err < 1e-5);
    }
}

TEST_CASE("T=1 without dropout is bitwise the standard one-step predictor") {
    Graph g(31);
    Rng rng(23);
    ParamSet ps;
    AnswerParams p = tiny_answer(g, ps, rng, 3, 1, 0.0);
    Tensor m = random_leaf(g, {6, 5}, rng, false);
    Tensor hq = random_leaf(g, {6, 3}, rng, false);

    Tensor s0 = initial_state(g, p, hq, 3);
    auto steps = reason_steps(g, p, s0, m, 5, 1);
    auto [ab, mask] = stochastic_average(g, steps.begin, 0.0, g.rng(), true);
    Tensor ae = average_with_mask(g, steps.end, mask);

    // Standard single-step predictor: begin/end readouts straight from s0.
    Tensor s0b = initial_state(g, p, hq, 3);
    Tensor srow = transpose(g, s0b);
    Tensor pb = softmax_masked(g, matmul(g, matmul(g, srow, p.w6), m), 1, 5);
    Tensor read = matmul(g, m, transpose(g, pb));
    Tensor joint = concat(g, {s0b, read}, 0);
    Tensor pe = softmax_masked(
        g, matmul(g, matmul(g, transpose(g, joint), p.w7), m), 1, 5);

    CHECK(ab.value() == pb.value());
    CHECK(ae.value() == pe.value());
}

TEST_CASE("averaged distributions stay valid for every mask") {
    Graph g(41);
    g.set_training(true);
    Rng rng(29);
    ParamSet ps;
    AnswerParams p = tiny_answer(g, ps, rng, 2, 4, 0.4);
    Tensor m = random_leaf(g, {4, 6}, rng, false);
    Tensor hq = random_leaf(g, {4, 2}, rng, false);

    for (int trial = 0; trial < 200; ++trial) {
        Tensor s0 = initial_state(g, p, hq, 2);
        auto steps = reason_steps(g, p, s0, m, 6, 4);
        auto [ab, mask] = stochastic_average(g, steps.begin, 0.4, g.rng(),
                                             true);
        Tensor ae = average_with_mask(g, steps.end, mask);
        double sb = 0, se = 0;
        for (double v : ab.value()) {
            CHECK(v >= 0.0);
            sb += v;
        }
        for (double v : ae.value()) se += v;
        CHECK(std::fabs(sb - 1.0) <= 1e-10);
        CHECK(std::fabs(se - 1.0) <= 1e-10);
        g.reset();
    }
}

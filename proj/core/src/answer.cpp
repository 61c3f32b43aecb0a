#include "san/answer.hpp"

#include <algorithm>
#include <cmath>

#include "san/log.hpp"

namespace san {

AnswerParams make_answer(Graph& g, ParamSet& ps, Rng& rng, std::size_t d,
                         std::size_t steps, double prediction_dropout) {
    if (steps < 1) throw ContractError("answer: steps must be >= 1");
    if (prediction_dropout < 0.0 || prediction_dropout >= 1.0)
        throw ContractError("answer: prediction dropout outside [0,1)");
    AnswerParams p;
    p.steps = steps;
    p.prediction_dropout = prediction_dropout;
    p.w4 = ps.add("ans.w4", init_uniform(g, rng, {2 * d}, 2 * d));
    p.w5 = ps.add("ans.w5", init_uniform(g, rng, {2 * d, 2 * d}, 2 * d));
    p.w6 = ps.add("ans.w6", init_uniform(g, rng, {2 * d, 2 * d}, 2 * d));
    p.w7 = ps.add("ans.w7", init_uniform(g, rng, {4 * d, 2 * d}, 4 * d));
    p.gru = make_gru(g, ps, "ans.gru", 2 * d, rng);
    return p;
}

Tensor initial_state(Graph& g, const AnswerParams& p, const Tensor& Hq,
                     std::size_t valid_m) {
    Tensor w_row = reshape(g, p.w4, {1, p.w4.dim(0)});
    Tensor scores = matmul(g, w_row, Hq);  // [1 x m]
    Tensor alpha = softmax_masked(g, scores, 1, valid_m);
    return matmul(g, Hq, transpose(g, alpha));  // [2d x 1]
}

namespace {

// One bilinear readout pair from a state column.
std::pair<Tensor, Tensor> predict_from_state(Graph& g, const AnswerParams& p,
                                             const Tensor& state,
                                             const Tensor& M,
                                             std::size_t valid_n) {
    Tensor srow = transpose(g, state);  // [1 x 2d]
    Tensor begin_scores = matmul(g, matmul(g, srow, p.w6), M);  // [1 x n]
    Tensor p_begin = softmax_masked(g, begin_scores, 1, valid_n);

    Tensor read = matmul(g, M, transpose(g, p_begin));  // [2d x 1]
    Tensor joint = concat(g, {state, read}, 0);         // [4d x 1]
    Tensor end_scores =
        matmul(g, matmul(g, transpose(g, joint), p.w7), M);  // [1 x n]
    Tensor p_end = softmax_masked(g, end_scores, 1, valid_n);
    return {p_begin, p_end};
}

}  // namespace

StepDistributions reason_steps(Graph& g, const AnswerParams& p,
                               const Tensor& s0, const Tensor& M,
                               std::size_t valid_n, std::size_t steps) {
    if (steps < 1) throw ContractError("reason_steps: steps must be >= 1");
    StepDistributions out;
    out.begin.reserve(steps);
    out.end.reserve(steps);

    Tensor state = s0;
    for (std::size_t t = 0; t < steps; ++t) {
        if (t > 0) {
            Tensor beta = softmax_masked(
                g, matmul(g, matmul(g, transpose(g, state), p.w5), M), 1,
                valid_n);
            Tensor x = matmul(g, M, transpose(g, beta));  // [2d x 1]
            state = gru_step(g, p.gru, state, x);
        }
        auto [pb, pe] = predict_from_state(g, p, state, M, valid_n);
        out.begin.push_back(pb);
        out.end.push_back(pe);
    }
    return out;
}

std::vector<bool> draw_keep_mask(Rng& rng, std::size_t steps, double rate) {
    if (steps < 1) throw ContractError("mask: steps must be >= 1");
    if (rate < 0.0 || rate >= 1.0)
        throw ContractError("mask: rate outside [0,1)");
    std::vector<bool> keep(steps);
    for (;;) {
        bool any = false;
        for (std::size_t t = 0; t < steps; ++t) {
            keep[t] = rng.bernoulli(1.0 - rate);
            any = any || keep[t];
        }
        if (any) return keep;
    }
}

Tensor average_with_mask(Graph& g, const std::vector<Tensor>& dists,
                         const std::vector<bool>& keep) {
    if (dists.empty() || dists.size() != keep.size())
        throw ContractError("average: mask/distribution count mismatch");
    Tensor acc;
    std::size_t kept = 0;
    for (std::size_t t = 0; t < dists.size(); ++t) {
        if (!keep[t]) continue;
        acc = kept == 0 ? dists[t] : add(g, acc, dists[t]);
        ++kept;
    }
    if (kept == 0) throw ContractError("average: empty keep mask");
    return scale(g, acc, 1.0 / static_cast<double>(kept));
}

std::pair<Tensor, std::vector<bool>> stochastic_average(
    Graph& g, const std::vector<Tensor>& dists, double rate, Rng& rng,
    bool training) {
    std::vector<bool> keep;
    if (training && rate > 0.0)
        keep = draw_keep_mask(rng, dists.size(), rate);
    else
        keep.assign(dists.size(), true);
    return {average_with_mask(g, dists, keep), keep};
}

DecodedSpan decode_span(std::span<const double> begin,
                        std::span<const double> end,
                        std::size_t max_span_len) {
    if (begin.empty() || begin.size() != end.size())
        throw ContractError("decode: distribution size mismatch");
    if (max_span_len < 1) throw ContractError("decode: max_span_len < 1");
    const std::size_t n = begin.size();
    DecodedSpan best{0, 0, -1.0};
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t jmax = std::min(n, i + max_span_len);
        for (std::size_t j = i; j < jmax; ++j) {
            const double s = begin[i] * end[j];
            if (s > best.score) best = {i, j, s};
        }
    }
    return best;
}

std::vector<DecodedSpan> kbest_spans(std::span<const double> begin,
                                     std::span<const double> end,
                                     std::size_t k,
                                     std::size_t max_span_len) {
    if (k < 1) throw ContractError("kbest: K must be >= 1");
    const std::size_t n = begin.size();
    std::vector<DecodedSpan> all;
    all.reserve(n * max_span_len);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t jmax = std::min(n, i + max_span_len);
        for (std::size_t j = i; j < jmax; ++j)
            all.push_back({i, j, begin[i] * end[j]});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const DecodedSpan& a, const DecodedSpan& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.start != b.start) return a.start < b.start;
                         return a.end < b.end;
                     });
    if (all.size() > k) all.resize(k);
    return all;
}

Tensor span_loss(Graph& g, const Tensor& avg_begin, const Tensor& avg_end,
                 std::size_t gold_start, std::size_t gold_end,
                 std::size_t valid_n) {
    if (gold_start >= valid_n || gold_end >= valid_n)
        throw DataError(strf("span_loss: gold span (%zu,%zu) outside [0,%zu)",
                             gold_start, gold_end, valid_n));
    constexpr double kEps = 1e-12;
    Tensor lb = log(g, add_const(g, pick(g, avg_begin, gold_start), kEps));
    Tensor le = log(g, add_const(g, pick(g, avg_end, gold_end), kEps));
    return neg(g, add(g, lb, le));
}

}  // namespace san

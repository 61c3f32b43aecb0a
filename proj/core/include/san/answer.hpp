#pragma once

#include <span>
#include <utility>
#include <vector>

#include "san/layers.hpp"

namespace san {

// Answer module: a GRU reasons over the memory for T steps, every step emits
// begin/end span distributions through bilinear readouts, training randomly
// drops whole step predictions before averaging, and decoding averages all
// steps.

struct AnswerParams {
    Tensor w4;      // [2d] question-summary scorer
    Tensor w5;      // [2d x 2d] memory read for the next state
    Tensor w6;      // [2d x 2d] begin readout
    Tensor w7;      // [4d x 2d] end readout
    GruParams gru;  // state size 2d
    std::size_t steps = 5;
    double prediction_dropout = 0.4;
};

AnswerParams make_answer(Graph& g, ParamSet& ps, Rng& rng, std::size_t d,
                         std::size_t steps, double prediction_dropout);

// s0 = sum_j alpha_j Hq_j, alpha = softmax over question positions of
// w4 . Hq_j. Returns a [2d x 1] column.
Tensor initial_state(Graph& g, const AnswerParams& p, const Tensor& Hq,
                     std::size_t valid_m);

struct StepDistributions {
    std::vector<Tensor> begin;  // T tensors, each [1 x n]
    std::vector<Tensor> end;
};

// Runs `steps` reasoning steps over M ([2d x n]). Step 0 predicts from s0
// directly; later steps advance the state by reading the memory first.
StepDistributions reason_steps(Graph& g, const AnswerParams& p,
                               const Tensor& s0, const Tensor& M,
                               std::size_t valid_n, std::size_t steps);

// Keep-decisions are Bernoulli(1 - rate) per step; an all-dropped draw is
// rejected and redrawn so at least one step stays active.
std::vector<bool> draw_keep_mask(Rng& rng, std::size_t steps, double rate);

// Arithmetic mean over the kept steps only; gradient flows only through them.
Tensor average_with_mask(Graph& g, const std::vector<Tensor>& dists,
                         const std::vector<bool>& keep);

// Training mode draws a mask (rejecting all-dropped); evaluation keeps every
// step. Returns the averaged distribution and the mask used.
std::pair<Tensor, std::vector<bool>> stochastic_average(
    Graph& g, const std::vector<Tensor>& dists, double rate, Rng& rng,
    bool training);

struct DecodedSpan {
    std::size_t start = 0;
    std::size_t end = 0;
    double score = 0.0;
};

// Best span by begin[i] * end[j] over i <= j < i + max_span_len; ties break
// toward the smaller start, then the smaller end.
DecodedSpan decode_span(std::span<const double> begin,
                        std::span<const double> end,
                        std::size_t max_span_len);

// Top-K legal spans by score, descending, same tie-break. Returns all legal
// spans when K exceeds their count.
std::vector<DecodedSpan> kbest_spans(std::span<const double> begin,
                                     std::span<const double> end,
                                     std::size_t k, std::size_t max_span_len);

// Negative log-likelihood of the gold endpoints under the averaged
// distributions (epsilon 1e-12). Gold indices must lie in [0, valid_n).
Tensor span_loss(Graph& g, const Tensor& avg_begin, const Tensor& avg_end,
                 std::size_t gold_start, std::size_t gold_end,
                 std::size_t valid_n);

// Materialized distributions for one example (first `n` entries only).
struct SpanDistributions {
    std::vector<std::vector<double>> per_step_begin;
    std::vector<std::vector<double>> per_step_end;
    std::vector<double> avg_begin;
    std::vector<double> avg_end;
    std::vector<bool> active_mask;  // all-true outside training
    Tensor avg_begin_t, avg_end_t;  // engine handles for the loss path
};

}  // namespace san

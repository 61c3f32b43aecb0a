#pragma once

#include <optional>

#include "san/layers.hpp"

namespace san {

// Layers 1-3 above the lexicon features: shared two-layer maxout BiLSTM
// contextual encoding, question/passage cross attention, diagonal-masked
// self attention, and the memory BiLSTM.
struct EncoderParams {
    FfnParams ffn_q;  // lexicon q-dim -> d
    FfnParams ffn_p;  // lexicon p-dim -> d
    LstmLayerParams ctx1, ctx2;  // shared between passage and question
    MaxoutParams shrink1, shrink2;  // 2d -> d after each contextual layer
    Tensor attn_w3;   // [k x 2d]
    Tensor self_w;    // [k x 4d]
    LstmLayerParams mem;  // 8d -> d per direction
    std::size_t hidden = 0;  // d
};

EncoderParams make_encoder(Graph& g, ParamSet& ps, Rng& rng,
                           std::size_t lex_q_dim, std::size_t lex_p_dim,
                           std::size_t d, std::size_t attn_k,
                           std::size_t maxout_pieces, std::size_t cove_dim);

struct WorkingMemory {
    Tensor M;   // [2d x n]
    Tensor Hq;  // [2d x m]
    Tensor C;   // [m x n] cross-attention matrix (post-dropout)
};

// Shared-weight contextual encoding of one token sequence: two BiLSTM layers
// with maxout shrink, optionally concatenating precomputed context vectors to
// both layer inputs. Output stacks the two layers' shrunk outputs: [2d x L].
Tensor contextual_encode_side(Graph& g, const EncoderParams& p,
                              const Tensor& lex, std::size_t valid,
                              const std::optional<Tensor>& cove,
                              double hidden_dropout);

std::pair<Tensor, Tensor> contextual_encode(
    Graph& g, const EncoderParams& p, const Tensor& Eq, const Tensor& Ep,
    std::size_t m, std::size_t n, const std::optional<Tensor>& cove_q,
    const std::optional<Tensor>& cove_p, double hidden_dropout);

// Transform-then-dot attention: softmax over the question axis per passage
// token, then dropout. Columns are stochastic over rows [0, valid_m) before
// dropout.
Tensor cross_attention(Graph& g, const Tensor& w3, const Tensor& Hq,
                       const Tensor& Hp, std::size_t valid_m,
                       double dropout_rate);

// Up = [Hp; Hq C], exactly 4d rows.
Tensor gather_passage(Graph& g, const Tensor& Hp, const Tensor& Hq,
                      const Tensor& C);

struct SelfAttention {
    Tensor attn;    // [n x n], diagonal exactly zero (undefined when n == 1)
    Tensor up_hat;  // [4d x n]
};

// Same transform-then-dot scheme against itself; the diagonal is excluded
// from normalization so every token aligns to other tokens. n == 1 yields a
// zero tensor (logged, not fatal).
SelfAttention self_attention_full(Graph& g, const Tensor& self_w,
                                  const Tensor& up, std::size_t valid_n,
                                  double dropout_rate);
Tensor self_attention(Graph& g, const Tensor& self_w, const Tensor& up,
                      std::size_t valid_n, double dropout_rate);

// M = BiLSTM([Up; Up_hat]) with hidden dropout on the output.
Tensor build_memory(Graph& g, const EncoderParams& p, const Tensor& up,
                    const Tensor& up_hat, std::size_t valid_n,
                    double hidden_dropout);

WorkingMemory encode(Graph& g, const EncoderParams& p, const Tensor& Eq,
                     const Tensor& Ep, std::size_t m, std::size_t n,
                     const std::optional<Tensor>& cove_q,
                     const std::optional<Tensor>& cove_p,
                     double hidden_dropout);

}  // namespace san

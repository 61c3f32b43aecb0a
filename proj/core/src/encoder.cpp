#include "san/encoder.hpp"

#include "san/log.hpp"

namespace san {

EncoderParams make_encoder(Graph& g, ParamSet& ps, Rng& rng,
                           std::size_t lex_q_dim, std::size_t lex_p_dim,
                           std::size_t d, std::size_t attn_k,
                           std::size_t maxout_pieces, std::size_t cove_dim) {
    EncoderParams p;
    p.hidden = d;
    p.ffn_q = make_ffn(g, ps, "lex.ffn_q", lex_q_dim, d, d, rng);
    p.ffn_p = make_ffn(g, ps, "lex.ffn_p", lex_p_dim, d, d, rng);
    p.ctx1 = make_bilstm_layer(g, ps, "ctx.l1", d + cove_dim, d, rng);
    p.ctx2 = make_bilstm_layer(g, ps, "ctx.l2", d + cove_dim, d, rng);
    p.shrink1 = make_maxout(g, ps, "ctx.l1.maxout", 2 * d, d, maxout_pieces,
                            rng);
    p.shrink2 = make_maxout(g, ps, "ctx.l2.maxout", 2 * d, d, maxout_pieces,
                            rng);
    p.attn_w3 = ps.add("mem.attn_w3",
                       init_uniform(g, rng, {attn_k, 2 * d}, 2 * d));
    p.self_w = ps.add("mem.self_w",
                      init_uniform(g, rng, {attn_k, 4 * d}, 4 * d));
    p.mem = make_bilstm_layer(g, ps, "mem.lstm", 8 * d, d, rng);
    return p;
}

Tensor contextual_encode_side(Graph& g, const EncoderParams& p,
                              const Tensor& lex, std::size_t valid,
                              const std::optional<Tensor>& cove,
                              double hidden_dropout) {
    if (cove) {
        if (cove->cols() != lex.cols())
            throw DimensionError(strf(
                "contextual encode: context vectors %s do not match input %s",
                shape_str(cove->shape()).c_str(),
                shape_str(lex.shape()).c_str()));
    }
    Tensor in1 = cove ? concat(g, {lex, *cove}, 0) : lex;
    Tensor raw1 = dropout(g, bilstm_forward(g, p.ctx1, in1, valid),
                          hidden_dropout);
    Tensor out1 = maxout_forward(g, p.shrink1, raw1);

    Tensor in2 = cove ? concat(g, {out1, *cove}, 0) : out1;
    Tensor raw2 = dropout(g, bilstm_forward(g, p.ctx2, in2, valid),
                          hidden_dropout);
    Tensor out2 = maxout_forward(g, p.shrink2, raw2);

    return concat(g, {out1, out2}, 0);
}

std::pair<Tensor, Tensor> contextual_encode(
    Graph& g, const EncoderParams& p, const Tensor& Eq, const Tensor& Ep,
    std::size_t m, std::size_t n, const std::optional<Tensor>& cove_q,
    const std::optional<Tensor>& cove_p, double hidden_dropout) {
    Tensor hq = contextual_encode_side(g, p, Eq, m, cove_q, hidden_dropout);
    Tensor hp = contextual_encode_side(g, p, Ep, n, cove_p, hidden_dropout);
    return {hq, hp};
}

Tensor cross_attention(Graph& g, const Tensor& w3, const Tensor& Hq,
                       const Tensor& Hp, std::size_t valid_m,
                       double dropout_rate) {
    Tensor hq_hat = attention_transform(g, w3, Hq);  // [k x m]
    Tensor hp_hat = attention_transform(g, w3, Hp);  // [k x n]
    Tensor scores = matmul(g, transpose(g, hq_hat), hp_hat);  // [m x n]
    Tensor c = softmax_masked(g, scores, 0, valid_m);
    return dropout(g, c, dropout_rate);
}

Tensor gather_passage(Graph& g, const Tensor& Hp, const Tensor& Hq,
                      const Tensor& C) {
    return concat(g, {Hp, matmul(g, Hq, C)}, 0);
}

SelfAttention self_attention_full(Graph& g, const Tensor& self_w,
                                  const Tensor& up, std::size_t valid_n,
                                  double dropout_rate) {
    const std::size_t w = up.cols();
    if (valid_n == 1) {
        log_debug("self attention: single-token passage, emitting zeros");
        return {Tensor(), g.zeros({up.rows(), w})};
    }

    Tensor u_hat = attention_transform(g, self_w, up);        // [k x w]
    Tensor scores = matmul(g, transpose(g, u_hat), u_hat);    // [w x w]

    // Additive mask: the diagonal and the padded tail drop out of the
    // normalization entirely, which leaves the diagonal exactly zero.
    std::vector<double> mask(w * w, 0.0);
    constexpr double kNegInf = -1e30;
    for (std::size_t j = 0; j < w; ++j)
        for (std::size_t i = 0; i < w; ++i)
            if (j == i || j >= valid_n) mask[j * w + i] = kNegInf;
    Tensor masked = add(g, scores, g.constant({w, w}, std::move(mask)));
    Tensor attn = softmax_masked(g, masked, 0, valid_n);
    attn = dropout(g, attn, dropout_rate);
    return {attn, matmul(g, up, attn)};
}

Tensor self_attention(Graph& g, const Tensor& self_w, const Tensor& up,
                      std::size_t valid_n, double dropout_rate) {
    return self_attention_full(g, self_w, up, valid_n, dropout_rate).up_hat;
}

Tensor build_memory(Graph& g, const EncoderParams& p, const Tensor& up,
                    const Tensor& up_hat, std::size_t valid_n,
                    double hidden_dropout) {
    Tensor joint = concat(g, {up, up_hat}, 0);  // [8d x n]
    Tensor m = bilstm_forward(g, p.mem, joint, valid_n);
    return dropout(g, m, hidden_dropout);
}

WorkingMemory encode(Graph& g, const EncoderParams& p, const Tensor& Eq,
                     const Tensor& Ep, std::size_t m, std::size_t n,
                     const std::optional<Tensor>& cove_q,
                     const std::optional<Tensor>& cove_p,
                     double hidden_dropout) {
    auto [hq, hp] = contextual_encode(g, p, Eq, Ep, m, n, cove_q, cove_p,
                                      hidden_dropout);
    Tensor c = cross_attention(g, p.attn_w3, hq, hp, m, hidden_dropout);
    Tensor up = gather_passage(g, hp, hq, c);
    Tensor up_hat = self_attention(g, p.self_w, up, n, hidden_dropout);
    Tensor mem = build_memory(g, p, up, up_hat, n, hidden_dropout);
    return {mem, hq, c};
}

}  // namespace san

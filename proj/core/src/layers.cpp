#include "san/layers.hpp"

#include <cmath>

#include "san/log.hpp"

namespace san {

Tensor init_uniform(Graph& g, Rng& rng, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return g.leaf(std::move(shape), std::move(v), true);
}

Tensor init_zeros(Graph& g, Shape shape) {
    return g.leaf(shape, std::vector<double>(shape_size(shape), 0.0), true);
}

Tensor init_orthogonal(Graph& g, Rng& rng, std::size_t n) {
    // Modified Gram-Schmidt on a Gaussian matrix, rows as vectors.
    std::vector<double> m(n * n);
    for (auto& x : m) x = rng.normal(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double* ri = m.data() + i * n;
        for (std::size_t j = 0; j < i; ++j) {
            const double* rj = m.data() + j * n;
            double dot = 0;
            for (std::size_t k = 0; k < n; ++k) dot += ri[k] * rj[k];
            for (std::size_t k = 0; k < n; ++k) ri[k] -= dot * rj[k];
        }
        double norm = 0;
        for (std::size_t k = 0; k < n; ++k) norm += ri[k] * ri[k];
        norm = std::sqrt(norm);
        if (norm < 1e-12) {
            // Degenerate draw; fall back to a unit basis vector.
            for (std::size_t k = 0; k < n; ++k) ri[k] = k == i ? 1.0 : 0.0;
        } else {
            for (std::size_t k = 0; k < n; ++k) ri[k] /= norm;
        }
    }
    return g.leaf({n, n}, std::move(m), true);
}

FfnParams make_ffn(Graph& g, ParamSet& ps, const std::string& prefix,
                   std::size_t in, std::size_t hidden, std::size_t out,
                   Rng& rng) {
    FfnParams p;
    p.w1 = ps.add(prefix + ".w1", init_uniform(g, rng, {hidden, in}, in));
    p.b1 = ps.add(prefix + ".b1", init_zeros(g, {hidden}));
    p.w2 = ps.add(prefix + ".w2", init_uniform(g, rng, {out, hidden}, hidden));
    p.b2 = ps.add(prefix + ".b2", init_zeros(g, {out}));
    return p;
}

namespace {

LstmDir make_lstm_dir(Graph& g, ParamSet& ps, const std::string& prefix,
                      std::size_t in, std::size_t h, Rng& rng) {
    LstmDir d;
    d.wx = ps.add(prefix + ".wx", init_uniform(g, rng, {4 * h, in}, in));

    // Stack four orthogonal h x h blocks for the recurrent matrix.
    std::vector<double> wh(4 * h * h);
    for (int gate = 0; gate < 4; ++gate) {
        Graph scratch;
        Tensor blk = init_orthogonal(scratch, rng, h);
        std::copy(blk.value().begin(), blk.value().end(),
                  wh.begin() + gate * static_cast<long>(h * h));
    }
    d.wh = ps.add(prefix + ".wh", g.leaf({4 * h, h}, std::move(wh), true));

    std::vector<double> b(4 * h, 0.0);
    for (std::size_t i = h; i < 2 * h; ++i) b[i] = 1.0;  // forget gate
    d.b = ps.add(prefix + ".b", g.leaf({4 * h}, std::move(b), true));
    return d;
}

// Runs one direction over columns [0, valid); returns per-position hidden
// columns (position order, not time order).
std::vector<Tensor> lstm_dir_forward(Graph& g, const LstmDir& p,
                                     std::size_t h, const Tensor& x,
                                     std::size_t valid, bool reverse) {
    // Input contributions for all positions in one product.
    Tensor xs = valid == x.cols() ? x : slice(g, x, 1, 0, valid);
    Tensor pre_all = add_bias(g, matmul(g, p.wx, xs), p.b);

    Tensor hprev = g.zeros({h, 1});
    Tensor cprev = g.zeros({h, 1});
    std::vector<Tensor> out(valid);
    for (std::size_t step = 0; step < valid; ++step) {
        const std::size_t t = reverse ? valid - 1 - step : step;
        Tensor pre = add(g, slice(g, pre_all, 1, t, t + 1),
                         matmul(g, p.wh, hprev));
        Tensor gi = sigmoid(g, slice(g, pre, 0, 0, h));
        Tensor gf = sigmoid(g, slice(g, pre, 0, h, 2 * h));
        Tensor gc = san::tanh(g, slice(g, pre, 0, 2 * h, 3 * h));
        Tensor go = sigmoid(g, slice(g, pre, 0, 3 * h, 4 * h));
        Tensor c = add(g, mul(g, gf, cprev), mul(g, gi, gc));
        Tensor hn = mul(g, go, san::tanh(g, c));
        out[t] = hn;
        hprev = hn;
        cprev = c;
    }
    return out;
}

}  // namespace

LstmLayerParams make_bilstm_layer(Graph& g, ParamSet& ps,
                                  const std::string& prefix, std::size_t in,
                                  std::size_t hidden, Rng& rng) {
    LstmLayerParams p;
    p.hidden = hidden;
    p.fwd = make_lstm_dir(g, ps, prefix + ".fwd", in, hidden, rng);
    p.bwd = make_lstm_dir(g, ps, prefix + ".bwd", in, hidden, rng);
    return p;
}

MaxoutParams make_maxout(Graph& g, ParamSet& ps, const std::string& prefix,
                         std::size_t in, std::size_t out, std::size_t pieces,
                         Rng& rng) {
    if (pieces < 2) throw ContractError("maxout: needs at least 2 pieces");
    MaxoutParams p;
    for (std::size_t k = 0; k < pieces; ++k) {
        p.w.push_back(ps.add(prefix + ".p" + std::to_string(k) + ".w",
                             init_uniform(g, rng, {out, in}, in)));
        p.b.push_back(ps.add(prefix + ".p" + std::to_string(k) + ".b",
                             init_zeros(g, {out})));
    }
    return p;
}

GruParams make_gru(Graph& g, ParamSet& ps, const std::string& prefix,
                   std::size_t state, Rng& rng) {
    GruParams p;
    auto in_mat = [&](const std::string& n) {
        return ps.add(prefix + "." + n,
                      init_uniform(g, rng, {state, state}, state));
    };
    auto rec_mat = [&](const std::string& n) {
        return ps.add(prefix + "." + n, init_orthogonal(g, rng, state));
    };
    auto bias = [&](const std::string& n) {
        return ps.add(prefix + "." + n, init_zeros(g, {state}));
    };
    p.wx_z = in_mat("wx_z");
    p.wh_z = rec_mat("wh_z");
    p.b_z = bias("b_z");
    p.wx_r = in_mat("wx_r");
    p.wh_r = rec_mat("wh_r");
    p.b_r = bias("b_r");
    p.wx_c = in_mat("wx_c");
    p.wh_c = rec_mat("wh_c");
    p.b_c = bias("b_c");
    return p;
}

Tensor ffn_forward(Graph& g, const FfnParams& p, const Tensor& x) {
    Tensor h = relu(g, add_bias(g, matmul(g, p.w1, x), p.b1));
    return add_bias(g, matmul(g, p.w2, h), p.b2);
}

Tensor bilstm_forward(Graph& g, const LstmLayerParams& p, const Tensor& x,
                      std::size_t valid) {
    if (x.rank() != 2) throw DimensionError("bilstm: rank-2 input required");
    const std::size_t L = x.cols();
    if (valid == 0 || valid > L)
        throw DimensionError(strf("bilstm: valid length %zu out of %zu",
                                  valid, L));
    const std::size_t h = p.hidden;

    auto fwd = lstm_dir_forward(g, p.fwd, h, x, valid, false);
    auto bwd = lstm_dir_forward(g, p.bwd, h, x, valid, true);

    std::vector<Tensor> cols;
    cols.reserve(valid);
    for (std::size_t t = 0; t < valid; ++t)
        cols.push_back(concat(g, {fwd[t], bwd[t]}, 0));
    Tensor out = cols.size() == 1 ? cols[0] : concat(g, cols, 1);
    if (L > valid)
        out = concat(g, {out, g.zeros({2 * h, L - valid})}, 1);
    return out;
}

Tensor bilstm_forward(Graph& g, const LstmParams& p, const Tensor& x,
                      std::size_t valid) {
    if (p.layers.empty()) throw ContractError("bilstm: no layers");
    Tensor cur = x;
    for (const auto& layer : p.layers)
        cur = bilstm_forward(g, layer, cur, valid);
    return cur;
}

Tensor maxout_forward(Graph& g, const MaxoutParams& p, const Tensor& x) {
    if (p.w.size() < 2) throw ContractError("maxout: needs at least 2 pieces");
    Tensor acc;
    for (std::size_t k = 0; k < p.w.size(); ++k) {
        Tensor piece = add_bias(g, matmul(g, p.w[k], x), p.b[k]);
        acc = k == 0 ? piece : max2(g, acc, piece);
    }
    return acc;
}

Tensor gru_step(Graph& g, const GruParams& p, const Tensor& s_prev,
                const Tensor& x) {
    Tensor z = sigmoid(g, add_bias(g, add(g, matmul(g, p.wx_z, x),
                                          matmul(g, p.wh_z, s_prev)),
                                   p.b_z));
    Tensor r = sigmoid(g, add_bias(g, add(g, matmul(g, p.wx_r, x),
                                          matmul(g, p.wh_r, s_prev)),
                                   p.b_r));
    Tensor cand = san::tanh(
        g, add_bias(g, add(g, matmul(g, p.wx_c, x),
                           matmul(g, p.wh_c, mul(g, r, s_prev))),
                    p.b_c));
    // s' = (1 - z) * s_prev + z * cand
    Tensor one_minus_z = add_const(g, neg(g, z), 1.0);
    return add(g, mul(g, one_minus_z, s_prev), mul(g, z, cand));
}

Tensor attention_transform(Graph& g, const Tensor& w, const Tensor& x) {
    return relu(g, matmul(g, w, x));
}

}  // namespace san

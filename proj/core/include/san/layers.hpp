#pragma once

#include <string>
#include <vector>

#include "san/ops.hpp"
#include "san/params.hpp"

namespace san {

// Reusable layers. All forwards are pure given their parameters; position-wise
// layers (FFN, maxout, attention transform) touch each column independently.

// out = w2 * relu(w1 * x + b1) + b2
struct FfnParams {
    Tensor w1, b1, w2, b2;
};

// One direction of one LSTM layer; gate rows stacked input,forget,cell,output.
struct LstmDir {
    Tensor wx;  // [4h x in]
    Tensor wh;  // [4h x h]
    Tensor b;   // [4h]
};

struct LstmLayerParams {
    LstmDir fwd, bwd;
    std::size_t hidden = 0;
};

struct LstmParams {
    std::vector<LstmLayerParams> layers;
};

// k parallel affine maps; output is their elementwise max.
struct MaxoutParams {
    std::vector<Tensor> w;  // each [out x in]
    std::vector<Tensor> b;  // each [out]
};

// Gate layout update,reset,candidate (documented in checkpoint metadata).
// wx_* multiply the input, wh_* the previous state.
struct GruParams {
    Tensor wx_z, wh_z, b_z;
    Tensor wx_r, wh_r, b_r;
    Tensor wx_c, wh_c, b_c;
};

// ---- initialization ----------------------------------------------------

Tensor init_uniform(Graph& g, Rng& rng, Shape shape, std::size_t fan_in);
Tensor init_zeros(Graph& g, Shape shape);
// Square orthogonal via modified Gram-Schmidt on a Gaussian draw.
Tensor init_orthogonal(Graph& g, Rng& rng, std::size_t n);

FfnParams make_ffn(Graph& g, ParamSet& ps, const std::string& prefix,
                   std::size_t in, std::size_t hidden, std::size_t out,
                   Rng& rng);
// Recurrent matrices orthogonal per gate block, input matrices uniform
// (-1/sqrt(fan_in), 1/sqrt(fan_in)), forget-gate bias 1, other biases 0.
LstmLayerParams make_bilstm_layer(Graph& g, ParamSet& ps,
                                  const std::string& prefix, std::size_t in,
                                  std::size_t hidden, Rng& rng);
MaxoutParams make_maxout(Graph& g, ParamSet& ps, const std::string& prefix,
                         std::size_t in, std::size_t out, std::size_t pieces,
                         Rng& rng);
GruParams make_gru(Graph& g, ParamSet& ps, const std::string& prefix,
                   std::size_t state, Rng& rng);

// ---- forwards ------------------------------------------------------------

Tensor ffn_forward(Graph& g, const FfnParams& p, const Tensor& x);

// Bidirectional single layer over columns [0, valid) of x; columns past
// `valid` come out zero. Output stacks forward over backward: [2h x L].
Tensor bilstm_forward(Graph& g, const LstmLayerParams& p, const Tensor& x,
                      std::size_t valid);
// Stacked layers, output of one feeding the next.
Tensor bilstm_forward(Graph& g, const LstmParams& p, const Tensor& x,
                      std::size_t valid);

Tensor maxout_forward(Graph& g, const MaxoutParams& p, const Tensor& x);

// One state update; s_prev and x are [state x 1] columns.
Tensor gru_step(Graph& g, const GruParams& p, const Tensor& s_prev,
                const Tensor& x);

// relu(W x), position-wise.
Tensor attention_transform(Graph& g, const Tensor& w, const Tensor& x);

}  // namespace san

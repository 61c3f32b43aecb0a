#pragma once

#include <span>
#include <vector>

#include "san/tensor.hpp"

namespace san {

// Differentiable op library. Shapes are strict: no implicit broadcasting
// beyond scalar*tensor (scale) and bias-vector addition (add_bias), so every
// backward rule stays auditable.

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b);

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
// out(i,j) = m(i,j) + bias(i); bias is rank-1 with length rows(m).
Tensor add_bias(Graph& g, const Tensor& m, const Tensor& bias);
Tensor scale(Graph& g, const Tensor& x, double c);
Tensor add_const(Graph& g, const Tensor& x, double c);
Tensor neg(Graph& g, const Tensor& x);

Tensor relu(Graph& g, const Tensor& x);
Tensor tanh(Graph& g, const Tensor& x);
Tensor sigmoid(Graph& g, const Tensor& x);
Tensor log(Graph& g, const Tensor& x);
// Elementwise max; ties route the gradient to `a`.
Tensor max2(Graph& g, const Tensor& a, const Tensor& b);

// Normalizes along `axis` (0: down each column, 1: across each row) with
// max-subtraction. Throws NumericError on non-finite input.
Tensor softmax(Graph& g, const Tensor& x, std::size_t axis);
// Same, but only the first `valid` entries of each lane participate; entries
// at or beyond `valid` come out exactly 0.
Tensor softmax_masked(Graph& g, const Tensor& x, std::size_t axis,
                      std::size_t valid);

Tensor concat(Graph& g, const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(Graph& g, const Tensor& x, std::size_t axis, std::size_t start,
             std::size_t end);
Tensor transpose(Graph& g, const Tensor& x);
Tensor reshape(Graph& g, const Tensor& x, Shape shape);

Tensor sum(Graph& g, const Tensor& x);
Tensor mean(Graph& g, const Tensor& x);
// Scalar view of one element (row-major flat index).
Tensor pick(Graph& g, const Tensor& x, std::size_t flat_index);

// Gathers table rows as columns: out[:, j] = table[ids[j], :]^T.
// table is [V x e]; result is [e x n].
Tensor embedding_cols(Graph& g, const Tensor& table, std::span<const int> ids);

// Inverted dropout: keeps units with probability 1-rate and scales them by
// 1/(1-rate). Identity when rate == 0 or the graph is in evaluation mode.
Tensor dropout(Graph& g, const Tensor& x, double rate);

}  // namespace san

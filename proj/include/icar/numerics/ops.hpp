#pragma once

#include "icar/numerics/tape.hpp"

#include <span>
#include <vector>

// Differentiable operations on Var. Every function records onto the tape of its
// inputs. Broadcasting is limited to the row-bias pattern of add_bias and the
// per-row gain/bias of layer_norm; any other shape mismatch throws DimensionError.
namespace icar {

// The GELU used everywhere: tanh approximation
//   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
double gelu_scalar(double x);
double gelu_derivative(double x);

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double s);
// a (m x n) + bias (1 x n) broadcast over rows.
Var add_bias(const Var& a, const Var& bias);
Var transpose(const Var& a);
// Row-major reinterpretation; rows * cols must equal a's element count.
Var reshape(const Var& a, Index rows, Index cols);

// axis 1 normalizes each row, axis 0 each column. Max-subtracted.
Var softmax(const Var& x, int axis = 1);
// Per-row normalization followed by gain (1 x d) and bias (1 x d).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var gelu(const Var& x);
Var sigmoid(const Var& x);
// Each row divided by its Euclidean norm.
Var l2_normalize_rows(const Var& x);

// Bidirectional multi-head attention softmax(q k^T / sqrt(dh)) v.
//
// q, k, v are (rows x heads*dh). Rows are a concatenation of independent
// sequences whose lengths are given by `segments`; attention never crosses
// a segment boundary. Head h owns columns [h*dh, (h+1)*dh).
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, int heads,
                         std::span<const Index> segments);
// Single segment covering all rows.
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, int heads);

// out.row(i) = x.row(index[i]); backward scatter-adds.
Var gather_rows(const Var& x, std::vector<Index> index);
Var concat_rows(const std::vector<Var>& parts);
// Mean of each consecutive group of `group` rows: (g*group x n) -> (g x n).
Var group_mean(const Var& x, Index group);

Var sum(const Var& x);
Var mean(const Var& x);

// Mean over rows of -log softmax(logits)[row, target[row]].
Var cross_entropy(const Var& logits, std::span<const int> targets);
// mean((pred - target)^2) over all elements.
Var mse_loss(const Var& pred, const Matrix& target);

// 3x3 same-padded convolution over a batch of images stored as
// (batch*height*width x channels_in), pixel-major. weight is
// (9*channels_in x channels_out) with row index (ky*3 + kx)*channels_in + c.
Var conv3x3(const Var& x, const Var& weight, Index batch, Index height, Index width);
// 2x2 average pooling in the same layout; height and width must be even.
Var avg_pool2x2(const Var& x, Index batch, Index height, Index width);

}  // namespace icar

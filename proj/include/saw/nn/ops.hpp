#pragma once

#include <cstddef>
#include <vector>

#include "saw/nn/tape.hpp"

// Differentiable operations on rank-2 tensors. Shapes must match exactly; the
// only implicit broadcast is a 1 x n bias added to every row. Mismatches throw
// ShapeError naming both shapes.
namespace saw::nn {

Var matmul(Var a, Var b);                       // (m x k)(k x n)
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);                          // elementwise
Var scale(Var a, double c);
Var add_row(Var a, Var bias);                   // a + bias in every row, bias 1 x n
Var linear(Var x, Var weight, Var bias);        // x W + b, W is in x out

Var relu(Var a);
/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))); gradients are of this exact formula.
Var gelu(Var a);
Var sigmoid(Var a);
Var softmax(Var a, int axis);                   // axis 0: columns sum to 1, axis 1: rows

/// Normalizes every row to zero mean / unit variance (biased variance + eps).
Var layer_norm(Var x, double eps = 1e-5);
/// layer_norm followed by gamma * x + beta, gamma and beta 1 x n.
Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);

Var concat(const std::vector<Var>& parts, int axis);
Var slice(Var a, int axis, std::size_t start, std::size_t len);
/// Row i of the result is row idx[i] of a; repeated indices scatter-add on backward.
Var gather_rows(Var a, const std::vector<std::size_t>& idx);

Var sum(Var a);   // 1 x 1
Var mean(Var a);  // 1 x 1

/// Multi-head scaled dot-product attention over `batch` independent items.
/// q: (batch * Tq) x d, k and v: (batch * Tk) x d, d divisible by n_heads.
/// Heads are concatenated along columns; the output projection is the caller's.
Var attention(Var q, Var k, Var v, std::size_t n_heads, std::size_t batch = 1);

/// Mean binary cross-entropy of `logits` (n x 1) against targets in [0, 1];
/// logits are clamped to [-clamp, clamp] (zero gradient outside).
Var bce_with_logits(Var logits, const std::vector<double>& targets, double clamp = 15.0);

/// Mean squared error over all elements.
Var mse(Var pred, const Tensor& target);

}  // namespace saw::nn

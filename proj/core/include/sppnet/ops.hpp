#pragma once

#include "sppnet/autograd.hpp"

// Differentiable operations. Feature maps are (C, H, W); token matrices are
// (N, D). All ops validate shapes and throw ShapeError on mismatch.
namespace sppnet::ops {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
/// Adds a constant tensor of identical shape.
Var add_constant(const Var& a, const Tensor& c);

/// (M, K) x (K, N) with optional transposes of either operand.
Var matmul(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);
/// x (N, in) -> x W^T + b, W (out, in), b (out) or undefined.
Var linear(const Var& x, const Var& weight, const Var& bias);
Var transpose(const Var& a);
Var reshape(const Var& a, Shape shape);

/// Leading-dimension slicing and concatenation (rows of a matrix, channels of a map).
Var slice_rows(const Var& a, int start, int count);
Var concat_rows(const std::vector<Var>& parts);
/// Column slicing and concatenation of matrices.
Var slice_cols(const Var& a, int start, int count);
Var concat_cols(const std::vector<Var>& parts);

Var gelu(const Var& a);
Var sigmoid(const Var& a);
Var softmax_rows(const Var& a);

/// Normalizes each row of (N, D) over D.
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);
/// Normalizes each pixel of (C, H, W) over C (channel-wise layer norm).
Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-6);

/// Grouped 2D convolution. weight (Cout, Cin/groups, k, k); bias (Cout) or undefined.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding, int groups = 1);
/// Transposed convolution with kernel == stride (non-overlapping).
/// weight (Cin, Cout, k, k); bias (Cout) or undefined.
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride);
/// Max pooling; padded positions never win.
Var max_pool2d(const Var& x, int kernel, int stride, int padding = 0);

Var sum(const Var& a);
/// sum(a * w) for a constant weight tensor of identical shape.
Var weighted_sum(const Var& a, const Tensor& w);

}  // namespace sppnet::ops

#pragma once

#include "gandetect/autodiff.hpp"
#include "gandetect/tensor.hpp"

namespace gandetect {

/// Norm floor below which normalization refuses to divide.
inline constexpr double kNormEpsilon = 1e-12;

// Plain forward evaluation.

/// Cross-correlation of a C x H x W input with an O x C x Kh x Kw kernel,
/// zero-fill padding. Output is O x H' x W' with H' = (H + 2p - Kh) / stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding);
Tensor relu(const Tensor& x);
/// C x H x W -> C, mean over the spatial extent.
Tensor global_average_pool(const Tensor& x);
/// weight (M x N) * x (N) + bias (M).
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor l2_normalize(const Tensor& x);
double cosine_similarity(const Tensor& u, const Tensor& v);
/// Pads a C x H x W tensor by replicating edge pixels.
Tensor pad_replicate(const Tensor& x, int padding);

// Recorded (differentiable) versions.

Var conv2d(Var input, Var kernel, Var bias, int stride, int padding);
Var relu(Var x);
Var global_average_pool(Var x);
Var affine(Var x, Var weight, Var bias);
Var l2_normalize(Var x);
Var cosine_similarity(Var u, Var v);
Var pad_replicate(Var x, int padding);
/// y[c] = scale[c] * x[c] + shift[c] for a C x H x W input.
Var channel_affine(Var x, Var scale, Var shift);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var sum(Var x);
Var mean(Var x);
Var sigmoid(Var x);

}  // namespace gandetect

#pragma once

#include <optional>
#include <string_view>
#include <utility>

#include "spartan/tensor.hpp"

namespace spartan {

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding, applied symmetrically
  std::size_t dilation = 1;
  std::size_t groups = 1;
};

/// Output extent of a convolution along one spatial axis.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const Conv2dOptions& opts);

/// 2-D cross-correlation (no kernel flip).
///
/// input [N, Cin, H, W], weight [Cout, Cin/groups, KH, KW], bias [Cout] or empty.
/// Differentiable w.r.t. all three.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& opts);

/// Global average pooling: [N, C, H, W] -> [N, C, 1, 1].
template <class T>
Tensor<T> gap(const Tensor<T>& input);

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;  // weight of the new batch statistic
  bool training = true;
};

/// Per-channel batch normalization over (N, H, W). In training mode the
/// running buffers are updated in place (unbiased variance, PyTorch style).
template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      Tensor<T>& running_mean, Tensor<T>& running_var,
                      const BatchNormOptions& opts);

/// Normalizes the channel vector at every (n, h, w) position. gamma/beta are [C].
template <class T>
Tensor<T> layernorm_channels(const Tensor<T>& input, const Tensor<T>& gamma,
                             const Tensor<T>& beta, double eps = 1e-6);

enum class Activation { gelu, silu, sigmoid, relu };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation kind);

/// Elementwise activation. gelu is the tanh approximation.
template <class T>
Tensor<T> activation(const Tensor<T>& input, Activation kind);

template <class T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

/// Concatenates along dim 1. An undefined tensor acts as the empty operand.
template <class T>
Tensor<T> channel_concat(const Tensor<T>& a, const Tensor<T>& b);

template <class T>
Tensor<T> channel_slice(const Tensor<T>& input, std::size_t start, std::size_t count);

template <class T>
std::pair<Tensor<T>, Tensor<T>> channel_split(const Tensor<T>& input, std::size_t first);

/// Positionwise maximum over channels: [N, C, H, W] -> [N, 1, H, W].
/// The subgradient goes to the lowest channel index among ties.
template <class T>
Tensor<T> channel_max(const Tensor<T>& input);

enum class Binary { add, sub, mul };

/// Numpy-style broadcasting result shape; throws ShapeError if incompatible.
Shape broadcast_shape(const Shape& a, const Shape& b);

template <class T>
Tensor<T> elementwise(const Tensor<T>& a, const Tensor<T>& b, Binary kind);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, Binary::add);
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, Binary::sub);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return elementwise(a, b, Binary::mul);
}

template <class T>
Tensor<T> scale(const Tensor<T>& input, T factor);

template <class T>
Tensor<T> reshape(const Tensor<T>& input, Shape shape);

/// Sum of all elements as a [1] tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& input);

template <class T>
Tensor<T> mean(const Tensor<T>& input);

}  // namespace spartan

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spartan/cost.hpp"
#include "spartan/ops.hpp"
#include "spartan/tensor.hpp"

namespace spartan {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool learnable = true;  // false for buffers such as BatchNorm running statistics
};

template <class T>
using NamedTensors = std::vector<NamedTensor<T>>;

/// Deterministic parameter initialization, consumed in construction order.
class ParamInit {
 public:
  explicit ParamInit(std::uint64_t seed) : engine_(seed) {}

  /// Normal(0, std) resampled until it falls within ±2·std.
  template <class T>
  void trunc_normal(Tensor<T>& t, double std) {
    std::normal_distribution<double> dist(0.0, std);
    for (auto& v : t.mutable_data()) {
      double x;
      do {
        x = dist(engine_);
      } while (std::abs(x) > 2.0 * std);
      v = static_cast<T>(x);
    }
  }

 private:
  std::mt19937_64 engine_;
};

inline constexpr double kInitStd = 0.02;

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         Conv2dOptions opts, bool with_bias, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x) const { return conv2d(x, weight, bias, opts); }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  Extent cost(CostReport& report, const std::string& prefix, const Extent& in) const;
  void zero();

  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  Conv2dOptions opts;
  Tensor<T> weight;  // [out, in/groups, k, k]
  Tensor<T> bias;    // [out] or undefined
};

/// Stride-1 convolution whose padding keeps H and W unchanged.
Conv2dOptions same_padding(std::size_t kernel, std::size_t dilation, std::size_t groups);

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in_features, std::size_t out_features, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x) const { return linear(x, weight, bias); }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  // Accounted as a 1x1 convolution at 1x1 resolution.
  void cost(CostReport& report, const std::string& prefix) const;

  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]
};

enum class NormKind { batchnorm, layernorm };

NormKind parse_norm(std::string_view name);
std::string_view norm_name(NormKind kind);

/// Per-channel normalization of an NCHW map: BatchNorm2d or channel LayerNorm.
template <class T>
class Norm2d {
 public:
  Norm2d() = default;
  Norm2d(NormKind kind, std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  NormKind kind = NormKind::batchnorm;
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;  // batchnorm only
  Tensor<T> running_var;   // batchnorm only
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Squeeze-and-Excitation: x ⊙ sigmoid(expand(relu(reduce(gap(x))))).
template <class T>
class SqueezeExcite {
 public:
  SqueezeExcite() = default;
  SqueezeExcite(std::size_t channels, std::size_t reduction, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x) const;
  /// The per-(sample, channel) gate, shape [N, C].
  Tensor<T> gate(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  std::size_t channels = 0;
  std::size_t reduction = 0;
  Linear<T> reduce;  // C -> C/ρ
  Linear<T> expand;  // C/ρ -> C
};

/// Feature decomposition: y = proj(x); y + gamma ⊙ (y − gap(y)).
template <class T>
class FeatureDecompose {
 public:
  FeatureDecompose() = default;
  FeatureDecompose(std::size_t channels, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  Conv2d<T> proj;   // 1x1, C -> C, with bias
  Tensor<T> gamma;  // [C], starts at zero
};

enum class EmbedVariant { overlapping, nonoverlapping };

EmbedVariant parse_embed_variant(std::string_view name);
std::string_view embed_variant_name(EmbedVariant v);

/// Stage stem. overlapping: 3x3/s2 -> C/2, norm, act, 3x3/s2 -> C, norm, act
/// (net /4). nonoverlapping: 2x2/s2 -> C, norm (net /2).
template <class T>
class PatchEmbed {
 public:
  PatchEmbed() = default;
  PatchEmbed(EmbedVariant variant, std::size_t in_channels, std::size_t out_channels,
             NormKind norm, Activation act, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  Extent cost(CostReport& report, const std::string& prefix, const Extent& in) const;
  std::size_t total_stride() const { return variant == EmbedVariant::overlapping ? 4 : 2; }

  EmbedVariant variant = EmbedVariant::nonoverlapping;
  Activation act = Activation::silu;
  Conv2d<T> conv1;
  Norm2d<T> norm1;
  Conv2d<T> conv2;  // overlapping only
  Norm2d<T> norm2;  // overlapping only
};

/// [C] parameter viewed as [1, C, 1, 1] for broadcasting over NCHW maps.
template <class T>
Tensor<T> channel_view(const Tensor<T>& per_channel) {
  return reshape(per_channel, Shape{1, per_channel.numel(), 1, 1});
}

}  // namespace spartan

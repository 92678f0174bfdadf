#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spartan/layers.hpp"

namespace spartan {

enum class ConvType { full, depthwise };
enum class KernelVariant { stacked3, single5 };

ConvType parse_conv_type(std::string_view name);
std::string_view conv_type_name(ConvType t);
KernelVariant parse_kernel_variant(std::string_view name);
std::string_view kernel_variant_name(KernelVariant v);

/// Everything a block needs to know about its stage and the model-wide switches.
struct BlockOptions {
  ConvType conv_type = ConvType::full;
  KernelVariant kernel_variant = KernelVariant::stacked3;
  std::size_t expand_ratio = 4;
  std::size_t se_reduction = 16;
  Activation act = Activation::gelu;
  NormKind conv_norm = NormKind::batchnorm;
  NormKind mixer_norm = NormKind::layernorm;
};

/// conv -> norm -> activation.
template <class T>
struct ConvUnit {
  ConvUnit() = default;
  ConvUnit(Conv2d<T> c, NormKind norm_kind, Activation a)
      : conv(std::move(c)), norm(norm_kind, conv.out_channels), act(a) {}

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return activation(norm.forward(conv.forward(x), training), act);
  }
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  Extent cost(CostReport& report, const std::string& prefix, const Extent& in) const;

  Conv2d<T> conv;
  Norm2d<T> norm;
  Activation act = Activation::gelu;
};

/// Spatial mixer: FD, split into halves, a dilation-1 3x3 branch and a dilated
/// large-receptive-field branch, per-branch SE, concat, 1x1 fuse.
template <class T>
class SMixer {
 public:
  SMixer() = default;
  SMixer(std::size_t channels, const BlockOptions& opts, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  /// Low-frequency branch alone (before SE), on a C/2-channel input.
  Tensor<T> low_branch(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  std::size_t channels = 0;
  FeatureDecompose<T> fd;
  ConvUnit<T> high;
  std::vector<ConvUnit<T>> low;  // two dilated 3x3 (stacked3) or one dilated 5x5 (single5)
  SqueezeExcite<T> se_high;
  SqueezeExcite<T> se_low;
  Conv2d<T> fuse;
};

/// (R', I') = (a⊙R − b⊙I, a⊙I + b⊙R), with a, b of shape [C/2] broadcast over N, H, W.
template <class T>
std::pair<Tensor<T>, Tensor<T>> complex_modulate(const Tensor<T>& re, const Tensor<T>& im,
                                                 const Tensor<T>& a, const Tensor<T>& b);

/// Channel-as-wave aggregation: F_max superposition, amplitude/phase 1x1
/// projections and a per-channel-pair complex weight.
template <class T>
class WaveAggregate {
 public:
  WaveAggregate() = default;
  WaveAggregate(std::size_t channels, Activation phase_act, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x) const;
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  std::size_t channels = 0;
  Activation phase_act = Activation::gelu;
  Conv2d<T> amp_proj;
  Conv2d<T> phase_proj;
  Tensor<T> a;  // [C/2], starts at 1
  Tensor<T> b;  // [C/2], starts at 0
};

/// Channel mixer: wave aggregation, pointwise expand to rC, 3x3 depthwise with
/// norm + activation, SE, 1x1 projection back to C.
template <class T>
class CMixer {
 public:
  CMixer() = default;
  CMixer(std::size_t channels, const BlockOptions& opts, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;

  std::size_t channels = 0;
  std::size_t hidden = 0;
  WaveAggregate<T> wave;
  Conv2d<T> expand;
  ConvUnit<T> spatial;
  SqueezeExcite<T> se;
  Conv2d<T> project;
};

/// y = x + SMixer(norm1(x)); z = y + CMixer(norm2(y)).
template <class T>
class Block {
 public:
  Block() = default;
  Block(std::size_t channels, const BlockOptions& opts, ParamInit& init);

  Tensor<T> forward(const Tensor<T>& x, bool training);
  void collect(const std::string& prefix, NamedTensors<T>& out) const;
  void cost(CostReport& report, const std::string& prefix, const Extent& e) const;
  /// Zeroes the fuse and project convs, turning the block into the identity.
  void zero_final_projections();

  std::size_t channels = 0;
  Norm2d<T> norm1;
  SMixer<T> smixer;
  Norm2d<T> norm2;
  CMixer<T> cmixer;
};

}  // namespace spartan

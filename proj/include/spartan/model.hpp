#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spartan/blocks.hpp"
#include "spartan/config.hpp"
#include "spartan/cost.hpp"

namespace spartan {

/// Four stages of (patch embed + N_i blocks), final norm, GAP and a linear head.
///
/// Tensors are shared handles, so copies of a Model share parameters.
template <class T>
class Model {
 public:
  struct Stage {
    PatchEmbed<T> embed;
    std::vector<Block<T>> blocks;
  };

  static Model build(const ModelConfig& cfg, std::uint64_t seed);

  /// Logits [N, num_classes]. Throws InputError unless H and W are multiples of 32.
  Tensor<T> forward(const Tensor<T>& x, bool training);
  /// Output of each stage, for structural checks.
  std::vector<Tensor<T>> stage_outputs(const Tensor<T>& x, bool training);

  /// Learnable tensors and buffers in a fixed, construction-derived order.
  NamedTensors<T> named_tensors() const;
  std::vector<Tensor<T>> parameters() const;

  CostReport costs(std::size_t height, std::size_t width) const;
  /// Per-stage output extents at the given input resolution.
  std::vector<Extent> stage_extents(std::size_t height, std::size_t width) const;

  const ModelConfig& config() const { return cfg_; }
  std::array<Stage, 4>& stages() { return stages_; }
  const std::array<Stage, 4>& stages() const { return stages_; }

 private:
  Model() = default;
  void check_input(const Tensor<T>& x) const;

  ModelConfig cfg_;
  std::array<Stage, 4> stages_;
  Norm2d<T> final_norm_;
  Linear<T> head_;
};

/// Hash over the bit patterns of every named tensor; used to detect mutation.
template <class T>
std::uint64_t parameter_checksum(const Model<T>& model);

}  // namespace spartan

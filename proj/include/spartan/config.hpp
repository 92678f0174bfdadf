#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spartan/blocks.hpp"

namespace spartan {

struct StageConfig {
  std::size_t channels = 32;
  std::size_t num_blocks = 1;
  std::size_t expand_ratio = 4;
  ConvType conv_type = ConvType::full;
  EmbedVariant embed_variant = EmbedVariant::nonoverlapping;

  bool operator==(const StageConfig&) const = default;
};

struct ModelConfig {
  std::string name = "custom";
  std::array<StageConfig, 4> stages{};
  std::size_t num_classes = 1000;
  std::size_t in_channels = 3;
  KernelVariant kernel_variant = KernelVariant::stacked3;
  std::size_t input_height = 224;
  std::size_t input_width = 224;
  // Ablation switches.
  std::size_t se_reduction = 16;
  Activation embed_activation = Activation::silu;
  Activation block_activation = Activation::gelu;
  NormKind conv_norm = NormKind::batchnorm;
  NormKind mixer_norm = NormKind::layernorm;

  BlockOptions block_options(std::size_t stage) const;
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr std::size_t kModelStride = 32;

/// Built-in presets: "spartan-xt", "spartan-t", "spartan-tiny".
ModelConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Throws ConfigError listing every violated constraint.
void validate(const ModelConfig& cfg);

nlohmann::ordered_json to_json(const ModelConfig& cfg);

/// Fields absent from `j` keep the values of the base preset named by the
/// optional "preset" key (spartan-xt otherwise). Unknown keys are errors.
ModelConfig from_json(const nlohmann::ordered_json& j);

/// Accepts a preset name or a path to a JSON config file.
ModelConfig resolve_config(const std::string& preset_or_path);

/// Applies "dotted.path=value", e.g. "stages.3.conv_type=full" (stage index is
/// 0-based) or "stages.*.conv_type=depthwise" for every stage.
void apply_override(ModelConfig& cfg, std::string_view assignment);

}  // namespace spartan

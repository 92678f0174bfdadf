#include "spartan/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace spartan {

using Json = nlohmann::ordered_json;

BlockOptions ModelConfig::block_options(std::size_t stage) const {
  BlockOptions o;
  o.conv_type = stages.at(stage).conv_type;
  o.kernel_variant = kernel_variant;
  o.expand_ratio = stages.at(stage).expand_ratio;
  o.se_reduction = se_reduction;
  o.act = block_activation;
  o.conv_norm = conv_norm;
  o.mixer_norm = mixer_norm;
  return o;
}

namespace {

ModelConfig make_preset(std::string name, std::array<std::size_t, 4> channels,
                        std::array<std::size_t, 4> blocks) {
  ModelConfig cfg;
  cfg.name = std::move(name);
  constexpr std::array<std::size_t, 4> ratios{4, 4, 2, 2};
  for (std::size_t s = 0; s < 4; ++s) {
    auto& st = cfg.stages[s];
    st.channels = channels[s];
    st.num_blocks = blocks[s];
    st.expand_ratio = ratios[s];
    st.conv_type = s < 2 ? ConvType::full : ConvType::depthwise;
    st.embed_variant = s == 0 ? EmbedVariant::overlapping : EmbedVariant::nonoverlapping;
  }
  return cfg;
}

}  // namespace

ModelConfig preset(std::string_view name) {
  if (name == "spartan-xt") return make_preset("spartan-xt", {32, 64, 96, 192}, {3, 3, 10, 2});
  if (name == "spartan-t") return make_preset("spartan-t", {32, 64, 128, 256}, {3, 3, 12, 2});
  if (name == "spartan-tiny") {
    auto cfg = make_preset("spartan-tiny", {8, 16, 24, 32}, {1, 1, 1, 1});
    cfg.num_classes = 10;
    cfg.input_height = cfg.input_width = 32;
    cfg.se_reduction = 4;
    return cfg;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: spartan-xt, spartan-t, spartan-tiny)");
}

std::vector<std::string> preset_names() { return {"spartan-xt", "spartan-t", "spartan-tiny"}; }

void validate(const ModelConfig& cfg) {
  std::vector<std::string> errors;
  auto fail = [&](std::string msg) { errors.push_back(std::move(msg)); };
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& st = cfg.stages[s];
    const std::string key = "stages." + std::to_string(s) + ".";
    if (st.channels < 2 || st.channels % 2 != 0) {
      fail(key + "channels must be even and >= 2, got " + std::to_string(st.channels));
    }
    if (st.num_blocks < 1) fail(key + "num_blocks must be >= 1");
    if (st.expand_ratio < 1) fail(key + "expand_ratio must be >= 1");
    if (cfg.se_reduction >= 1 && st.channels >= 2) {
      const std::size_t half = st.channels / 2;
      const std::size_t wide = st.channels * st.expand_ratio;
      if (half % cfg.se_reduction != 0 || wide % cfg.se_reduction != 0) {
        fail("se_reduction " + std::to_string(cfg.se_reduction) + " must divide " + key +
             "channels/2 (" + std::to_string(half) + ") and channels*expand_ratio (" +
             std::to_string(wide) + ")");
      }
    }
  }
  if (cfg.se_reduction < 1) fail("se_reduction must be >= 1");
  if (cfg.num_classes < 2) fail("num_classes must be >= 2");
  if (cfg.in_channels < 1) fail("in_channels must be >= 1");
  if (cfg.input_height == 0 || cfg.input_height % kModelStride != 0 || cfg.input_width == 0 ||
      cfg.input_width % kModelStride != 0) {
    fail("input_resolution " + std::to_string(cfg.input_height) + "x" +
         std::to_string(cfg.input_width) + " must be a positive multiple of " +
         std::to_string(kModelStride));
  }
  if (errors.empty()) return;
  std::string msg = "invalid model config:";
  for (const auto& e : errors) msg += "\n  - " + e;
  throw ConfigError(msg);
}

Json to_json(const ModelConfig& cfg) {
  Json j;
  j["name"] = cfg.name;
  Json stages = Json::array();
  for (const auto& st : cfg.stages) {
    Json s;
    s["channels"] = st.channels;
    s["num_blocks"] = st.num_blocks;
    s["expand_ratio"] = st.expand_ratio;
    s["conv_type"] = conv_type_name(st.conv_type);
    s["embed_variant"] = embed_variant_name(st.embed_variant);
    stages.push_back(std::move(s));
  }
  j["stages"] = std::move(stages);
  j["num_classes"] = cfg.num_classes;
  j["in_channels"] = cfg.in_channels;
  j["kernel_variant"] = kernel_variant_name(cfg.kernel_variant);
  j["input_resolution"] = Json::array({cfg.input_height, cfg.input_width});
  j["se_reduction"] = cfg.se_reduction;
  j["embed_activation"] = activation_name(cfg.embed_activation);
  j["block_activation"] = activation_name(cfg.block_activation);
  j["conv_norm"] = norm_name(cfg.conv_norm);
  j["mixer_norm"] = norm_name(cfg.mixer_norm);
  return j;
}

namespace {

std::size_t get_uint(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got " + v.dump());
  }
  return v.get<std::size_t>();
}

std::string get_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string, got " + v.dump());
  return v.get<std::string>();
}

template <class Parse>
auto get_enum(const Json& v, const std::string& key, Parse parse) {
  const auto s = get_string(v, key);
  try {
    return parse(s);
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

void require_object(const Json& j, const std::string& key) {
  if (!j.is_object()) {
    throw ConfigError("config " + (key.empty() ? std::string("document") : "key '" + key + "'") +
                      " must be an object");
  }
}

void read_stage(const Json& j, StageConfig& st, const std::string& prefix) {
  require_object(j, prefix);
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix + "." + k;
    if (k == "channels") st.channels = get_uint(v, key);
    else if (k == "num_blocks") st.num_blocks = get_uint(v, key);
    else if (k == "expand_ratio") st.expand_ratio = get_uint(v, key);
    else if (k == "conv_type") st.conv_type = get_enum(v, key, parse_conv_type);
    else if (k == "embed_variant") st.embed_variant = get_enum(v, key, parse_embed_variant);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

}  // namespace

ModelConfig from_json(const Json& j) {
  require_object(j, "");
  ModelConfig cfg = preset(j.contains("preset") ? get_string(j["preset"], "preset") : "spartan-xt");
  if (!j.contains("preset")) cfg.name = "custom";
  for (const auto& [k, v] : j.items()) {
    if (k == "preset") continue;
    if (k == "name") cfg.name = get_string(v, k);
    else if (k == "stages") {
      if (!v.is_array() || v.size() != 4) throw ConfigError("config key 'stages' must be a list of 4 stages");
      for (std::size_t s = 0; s < 4; ++s) read_stage(v[s], cfg.stages[s], "stages." + std::to_string(s));
    } else if (k == "num_classes") cfg.num_classes = get_uint(v, k);
    else if (k == "in_channels") cfg.in_channels = get_uint(v, k);
    else if (k == "kernel_variant") cfg.kernel_variant = get_enum(v, k, parse_kernel_variant);
    else if (k == "input_resolution") {
      if (v.is_array() && v.size() == 2) {
        cfg.input_height = get_uint(v[0], "input_resolution.0");
        cfg.input_width = get_uint(v[1], "input_resolution.1");
      } else {
        cfg.input_height = cfg.input_width = get_uint(v, k);
      }
    } else if (k == "se_reduction") cfg.se_reduction = get_uint(v, k);
    else if (k == "embed_activation") cfg.embed_activation = get_enum(v, k, parse_activation);
    else if (k == "block_activation") cfg.block_activation = get_enum(v, k, parse_activation);
    else if (k == "conv_norm") cfg.conv_norm = get_enum(v, k, parse_norm);
    else if (k == "mixer_norm") cfg.mixer_norm = get_enum(v, k, parse_norm);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  validate(cfg);
  return cfg;
}

ModelConfig resolve_config(const std::string& preset_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) {
    return preset(preset_or_path);
  }
  std::ifstream in(preset_or_path);
  if (!in) {
    throw ConfigError("'" + preset_or_path + "' is neither a preset nor a readable config file");
  }
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + preset_or_path + "': " + e.what());
  }
  return from_json(j);
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

Json parse_uint_value(const std::string& text, const std::string& key) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end || text.empty()) {
    throw ConfigError("override '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

void assign_leaf(Json& leaf, const std::string& value, const std::string& key) {
  if (leaf.is_string()) {
    leaf = value;
  } else if (leaf.is_number()) {
    leaf = parse_uint_value(value, key);
  } else if (leaf.is_array()) {  // input_resolution: "H,W", "HxW" or a single extent
    const auto sep = value.find_first_of(",x");
    if (sep == std::string::npos) {
      const auto v = parse_uint_value(value, key);
      leaf = Json::array({v, v});
    } else {
      leaf = Json::array({parse_uint_value(value.substr(0, sep), key),
                          parse_uint_value(value.substr(sep + 1), key)});
    }
  } else {
    throw ConfigError("override '" + key + "' does not name a value");
  }
}

void apply_path(Json& node, const std::vector<std::string>& path, std::size_t depth,
                const std::string& value, const std::string& key) {
  if (depth == path.size()) {
    assign_leaf(node, value, key);
    return;
  }
  const auto& part = path[depth];
  if (node.is_array()) {
    if (part == "*") {
      for (auto& child : node) apply_path(child, path, depth + 1, value, key);
      return;
    }
    std::size_t idx = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), idx);
    if (ec != std::errc{} || p != part.data() + part.size() || idx >= node.size()) {
      throw ConfigError("override '" + key + "': bad index '" + part + "'");
    }
    apply_path(node[idx], path, depth + 1, value, key);
    return;
  }
  if (!node.is_object() || !node.contains(part)) throw ConfigError("unknown config key '" + key + "'");
  apply_path(node[part], path, depth + 1, value, key);
}

}  // namespace

void apply_override(ModelConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' must have the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  Json j = to_json(cfg);
  apply_path(j, split(key, '.'), 0, value, key);
  const std::string name = cfg.name;
  j["preset"] = "spartan-xt";  // every field is present, so the base is irrelevant
  cfg = from_json(j);
  if (key != "name") cfg.name = name;
}

}  // namespace spartan

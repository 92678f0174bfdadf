#include <random>

#include "spartan/cli.hpp"
#include "spartan/loss.hpp"

namespace spartan {

namespace {

class Suite {
 public:
  Suite(const ModelConfig& cfg, const GradcheckOptions& opts)
      : cfg_(cfg), opts_(opts), rng_(opts.seed), init_(opts.seed) {}

  TensorD random(Shape shape, double stddev = 1.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    TensorD t = TensorD::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) v = dist(rng_);
    return t;
  }

  // Small weights from the default init leave most gradients near the
  // floor; re-draw them so every path carries signal.
  std::vector<GradcheckInput> params(const NamedTensors<double>& named) {
    std::normal_distribution<double> dist(0.0, 0.5);
    std::vector<GradcheckInput> out;
    for (const auto& nt : named) {
      if (!nt.learnable) continue;
      auto t = nt.tensor;
      for (auto& v : t.mutable_data()) v = dist(rng_);
      out.push_back({nt.name, t});
    }
    return out;
  }

  void run(std::string name, const std::function<TensorD()>& fn, std::vector<GradcheckInput> inputs) {
    results_.push_back({std::move(name), gradcheck(fn, std::move(inputs), opts_)});
  }

  std::vector<GradcheckComponent> all();

 private:
  void core_ops();
  void layers();
  void blocks();

  ModelConfig cfg_;
  GradcheckOptions opts_;
  std::mt19937_64 rng_;
  ParamInit init_;
  std::vector<GradcheckComponent> results_;
};

void Suite::core_ops() {
  {
    auto x = random({2, 4, 5, 5});
    auto w = random({6, 4, 3, 3});
    auto b = random({6});
    Conv2dOptions o;
    o.stride = 2;
    o.padding = 1;
    run("conv2d", [=] { return conv2d(x, w, b, o); }, {{"x", x}, {"weight", w}, {"bias", b}});
  }
  {
    auto x = random({2, 4, 6, 6});
    auto w = random({4, 2, 3, 3});
    Conv2dOptions o;
    o.padding = 2;
    o.dilation = 2;
    o.groups = 2;
    run("conv2d_grouped_dilated", [=] { return conv2d(x, w, TensorD{}, o); }, {{"x", x}, {"weight", w}});
  }
  {
    auto x = random({2, 4, 5, 5});
    auto w = random({4, 1, 3, 3});
    const auto o = same_padding(3, 1, 4);
    run("conv2d_depthwise", [=] { return conv2d(x, w, TensorD{}, o); }, {{"x", x}, {"weight", w}});
  }
  {
    auto x = random({3, 5});
    auto w = random({4, 5});
    auto b = random({4});
    run("linear", [=] { return linear(x, w, b); }, {{"x", x}, {"weight", w}, {"bias", b}});
  }
  {
    auto x = random({3, 4, 3, 3});
    auto g = random({4});
    auto b = random({4});
    auto rm = TensorD::zeros({4});
    auto rv = TensorD::ones({4});
    run("batchnorm2d", [=]() mutable { return batchnorm2d(x, g, b, rm, rv, BatchNormOptions{}); },
        {{"x", x}, {"gamma", g}, {"beta", b}});
  }
  {
    auto x = random({2, 5, 3, 3});
    auto g = random({5});
    auto b = random({5});
    run("layernorm_channels", [=] { return layernorm_channels(x, g, b); },
        {{"x", x}, {"gamma", g}, {"beta", b}});
  }
  for (auto kind : {Activation::gelu, Activation::silu, Activation::sigmoid, Activation::relu}) {
    auto x = random({2, 3, 4, 4});
    run("activation_" + std::string(activation_name(kind)), [=] { return activation(x, kind); }, {{"x", x}});
  }
  {
    auto x = random({2, 3, 4, 5});
    run("gap", [=] { return gap(x); }, {{"x", x}});
  }
  {
    auto a = random({2, 3, 4, 4});
    auto b = random({2, 2, 4, 4});
    run("channel_concat_split",
        [=] {
          auto [lo, hi] = channel_split(channel_concat(a, b), 2);
          return channel_concat(mul(hi, hi), lo);
        },
        {{"a", a}, {"b", b}});
  }
  {
    auto x = random({2, 5, 4, 4});
    run("channel_max", [=] { return channel_max(x); }, {{"x", x}});
  }
  {
    auto x = random({2, 3, 4, 4});
    auto s = random({1, 3, 1, 1});
    auto p = random({2, 1, 4, 4});
    run("elementwise_broadcast", [=] { return sub(add(mul(x, s), p), mul(p, s)); },
        {{"x", x}, {"scale", s}, {"plane", p}});
  }
  {
    auto z = random({4, 5});
    std::vector<std::int64_t> labels{0, 3, 4, 1};
    run("cross_entropy", [=] { return cross_entropy(z, labels); }, {{"logits", z}});
  }
}

void Suite::layers() {
  {
    SqueezeExcite<double> se(8, 2, init_);
    NamedTensors<double> named;
    se.collect("se", named);
    auto inputs = params(named);
    auto x = random({2, 8, 4, 4});
    inputs.push_back({"x", x});
    run("squeeze_excite", [=] { return se.forward(x); }, inputs);
  }
  {
    FeatureDecompose<double> fd(6, init_);
    NamedTensors<double> named;
    fd.collect("fd", named);
    auto inputs = params(named);
    auto x = random({2, 6, 4, 4});
    inputs.push_back({"x", x});
    run("feature_decompose", [=] { return fd.forward(x); }, inputs);
  }
  for (auto variant : {EmbedVariant::overlapping, EmbedVariant::nonoverlapping}) {
    PatchEmbed<double> pe(variant, 3, 8, cfg_.conv_norm, cfg_.embed_activation, init_);
    NamedTensors<double> named;
    pe.collect("embed", named);
    auto inputs = params(named);
    auto x = random({2, 3, 8, 8});
    inputs.push_back({"x", x});
    run("patch_embed_" + std::string(embed_variant_name(variant)),
        [=]() mutable { return pe.forward(x, true); }, inputs);
  }
}

void Suite::blocks() {
  constexpr std::size_t c = 8, hw = 6;
  BlockOptions base;
  base.act = cfg_.block_activation;
  base.conv_norm = cfg_.conv_norm;
  base.mixer_norm = cfg_.mixer_norm;
  base.se_reduction = 2;
  base.expand_ratio = 2;

  for (auto variant : {KernelVariant::stacked3, KernelVariant::single5}) {
    auto o = base;
    o.kernel_variant = variant;
    o.conv_type = variant == KernelVariant::stacked3 ? ConvType::full : ConvType::depthwise;
    SMixer<double> sm(c, o, init_);
    NamedTensors<double> named;
    sm.collect("smixer", named);
    auto inputs = params(named);
    auto x = random({2, c, hw, hw});
    inputs.push_back({"x", x});
    run("smixer_" + std::string(kernel_variant_name(variant)) + "_" +
            std::string(conv_type_name(o.conv_type)),
        [=]() mutable { return sm.forward(x, true); }, inputs);
  }
  {
    WaveAggregate<double> wave(c, base.act, init_);
    NamedTensors<double> named;
    wave.collect("wave", named);
    auto inputs = params(named);
    auto x = random({2, c, hw, hw});
    inputs.push_back({"x", x});
    run("wave_aggregate", [=] { return wave.forward(x); }, inputs);
  }
  {
    CMixer<double> cm(c, base, init_);
    NamedTensors<double> named;
    cm.collect("cmixer", named);
    auto inputs = params(named);
    auto x = random({2, c, hw, hw});
    inputs.push_back({"x", x});
    run("cmixer", [=]() mutable { return cm.forward(x, true); }, inputs);
  }
  for (auto type : {ConvType::full, ConvType::depthwise}) {
    auto o = base;
    o.conv_type = type;
    o.kernel_variant = cfg_.kernel_variant;
    Block<double> block(c, o, init_);
    NamedTensors<double> named;
    block.collect("block", named);
    auto inputs = params(named);
    auto x = random({2, c, hw, hw});
    inputs.push_back({"x", x});
    run("block_" + std::string(conv_type_name(type)), [=]() mutable { return block.forward(x, true); },
        inputs);
  }
}

std::vector<GradcheckComponent> Suite::all() {
  core_ops();
  layers();
  blocks();
  return std::move(results_);
}

}  // namespace

std::vector<GradcheckComponent> run_gradcheck_suite(const ModelConfig& cfg, const GradcheckOptions& opts) {
  return Suite(cfg, opts).all();
}

}  // namespace spartan

#include "spartan/blocks.hpp"

namespace spartan {

ConvType parse_conv_type(std::string_view name) {
  if (name == "full") return ConvType::full;
  if (name == "depthwise") return ConvType::depthwise;
  throw ConfigError("unknown conv type '" + std::string(name) + "'");
}

std::string_view conv_type_name(ConvType t) { return t == ConvType::full ? "full" : "depthwise"; }

KernelVariant parse_kernel_variant(std::string_view name) {
  if (name == "stacked3") return KernelVariant::stacked3;
  if (name == "single5") return KernelVariant::single5;
  throw ConfigError("unknown kernel variant '" + std::string(name) + "'");
}

std::string_view kernel_variant_name(KernelVariant v) {
  return v == KernelVariant::stacked3 ? "stacked3" : "single5";
}

namespace {

void require_even(std::size_t channels, const char* who) {
  if (channels < 2 || channels % 2 != 0) {
    throw ConfigError(std::string(who) + ": channel count must be even, got " +
                      std::to_string(channels));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvUnit

template <class T>
void ConvUnit<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  conv.collect(prefix + ".conv", out);
  norm.collect(prefix + ".norm", out);
}

template <class T>
Extent ConvUnit<T>::cost(CostReport& report, const std::string& prefix, const Extent& in) const {
  const Extent e = conv.cost(report, prefix + ".conv", in);
  norm.cost(report, prefix + ".norm", e);
  report.add(elementwise_row(prefix + ".act", "activation", e));
  return e;
}

// ---------------------------------------------------------------------------
// SMixer

template <class T>
SMixer<T>::SMixer(std::size_t c, const BlockOptions& opts, ParamInit& init) : channels(c) {
  require_even(c, "SMixer");
  const std::size_t hc = c / 2;
  const std::size_t groups = opts.conv_type == ConvType::depthwise ? hc : 1;
  fd = FeatureDecompose<T>(c, init);
  high = ConvUnit<T>(Conv2d<T>(hc, hc, 3, same_padding(3, 1, groups), false, init), opts.conv_norm,
                     opts.act);
  if (opts.kernel_variant == KernelVariant::stacked3) {
    for (int i = 0; i < 2; ++i) {
      low.emplace_back(Conv2d<T>(hc, hc, 3, same_padding(3, 2, groups), false, init),
                       opts.conv_norm, opts.act);
    }
  } else {
    low.emplace_back(Conv2d<T>(hc, hc, 5, same_padding(5, 2, groups), false, init), opts.conv_norm,
                     opts.act);
  }
  se_high = SqueezeExcite<T>(hc, opts.se_reduction, init);
  se_low = SqueezeExcite<T>(hc, opts.se_reduction, init);
  fuse = Conv2d<T>(c, c, 1, Conv2dOptions{}, true, init);
}

template <class T>
Tensor<T> SMixer<T>::low_branch(const Tensor<T>& x, bool training) {
  Tensor<T> y = x;
  for (auto& unit : low) y = unit.forward(y, training);
  return y;
}

template <class T>
Tensor<T> SMixer<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError("SMixer: expected [N," + std::to_string(channels) + ",H,W], got " +
                     shape_str(x.shape()));
  }
  auto d = fd.forward(x);
  auto [dh, dl] = channel_split(d, channels / 2);
  auto fh = se_high.forward(high.forward(dh, training));
  auto fl = se_low.forward(low_branch(dl, training));
  return fuse.forward(channel_concat(fh, fl));
}

template <class T>
void SMixer<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  fd.collect(prefix + ".fd", out);
  high.collect(prefix + ".high", out);
  for (std::size_t i = 0; i < low.size(); ++i) low[i].collect(prefix + ".low" + std::to_string(i), out);
  se_high.collect(prefix + ".se_high", out);
  se_low.collect(prefix + ".se_low", out);
  fuse.collect(prefix + ".fuse", out);
}

template <class T>
void SMixer<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  fd.cost(report, prefix + ".fd", e);
  const Extent half{channels / 2, e.h, e.w};
  high.cost(report, prefix + ".high", half);
  for (std::size_t i = 0; i < low.size(); ++i) low[i].cost(report, prefix + ".low" + std::to_string(i), half);
  se_high.cost(report, prefix + ".se_high", half);
  se_low.cost(report, prefix + ".se_low", half);
  fuse.cost(report, prefix + ".fuse", e);
}

// ---------------------------------------------------------------------------
// Wave aggregation

template <class T>
std::pair<Tensor<T>, Tensor<T>> complex_modulate(const Tensor<T>& re, const Tensor<T>& im,
                                                 const Tensor<T>& a, const Tensor<T>& b) {
  if (re.shape() != im.shape()) {
    throw ShapeError("complex_modulate: real/imaginary shapes differ: " + shape_str(re.shape()) +
                     " vs " + shape_str(im.shape()));
  }
  if (re.rank() != 4 || a.numel() != re.dim(1) || b.numel() != re.dim(1)) {
    throw ShapeError("complex_modulate: weights must have one entry per channel of " +
                     shape_str(re.shape()));
  }
  const auto av = channel_view(a);
  const auto bv = channel_view(b);
  auto out_re = sub(mul(av, re), mul(bv, im));
  auto out_im = add(mul(av, im), mul(bv, re));
  return {out_re, out_im};
}

template <class T>
WaveAggregate<T>::WaveAggregate(std::size_t c, Activation act, ParamInit& init)
    : channels(c), phase_act(act) {
  require_even(c, "wave aggregation");
  amp_proj = Conv2d<T>(c, c, 1, Conv2dOptions{}, true, init);
  phase_proj = Conv2d<T>(c, c, 1, Conv2dOptions{}, true, init);
  a = Tensor<T>::ones({c / 2});
  b = Tensor<T>::zeros({c / 2});
}

template <class T>
Tensor<T> WaveAggregate<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError("wave aggregation: expected [N," + std::to_string(channels) + ",H,W], got " +
                     shape_str(x.shape()));
  }
  auto superposed = add(x, channel_max(x));
  auto amplitude = amp_proj.forward(superposed);
  auto phase = activation(phase_proj.forward(superposed), phase_act);
  auto [re, im] = channel_split(mul(amplitude, phase), channels / 2);
  auto [re2, im2] = complex_modulate(re, im, a, b);
  return channel_concat(re2, im2);
}

template <class T>
void WaveAggregate<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  amp_proj.collect(prefix + ".amp_proj", out);
  phase_proj.collect(prefix + ".phase_proj", out);
  out.push_back({prefix + ".a", a, true});
  out.push_back({prefix + ".b", b, true});
}

template <class T>
void WaveAggregate<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  // channel max + broadcast add
  report.add(elementwise_row(prefix + ".superpose", "wave", e, 2));
  amp_proj.cost(report, prefix + ".amp_proj", e);
  phase_proj.cost(report, prefix + ".phase_proj", e);
  report.add(elementwise_row(prefix + ".phase_act", "activation", e));
  report.add(elementwise_row(prefix + ".product", "wave", e));
  // two products per output element, one add/sub
  report.add(elementwise_row(prefix + ".modulate", "wave", e, 2, a.numel() + b.numel(),
                             {prefix + ".a", prefix + ".b"}));
}

// ---------------------------------------------------------------------------
// CMixer

template <class T>
CMixer<T>::CMixer(std::size_t c, const BlockOptions& opts, ParamInit& init)
    : channels(c), hidden(c * opts.expand_ratio) {
  require_even(c, "CMixer");
  if (opts.expand_ratio == 0) throw ConfigError("CMixer: expand ratio must be >= 1");
  wave = WaveAggregate<T>(c, opts.act, init);
  expand = Conv2d<T>(c, hidden, 1, Conv2dOptions{}, true, init);
  spatial = ConvUnit<T>(Conv2d<T>(hidden, hidden, 3, same_padding(3, 1, hidden), false, init),
                        opts.conv_norm, opts.act);
  se = SqueezeExcite<T>(hidden, opts.se_reduction, init);
  project = Conv2d<T>(hidden, c, 1, Conv2dOptions{}, true, init);
}

template <class T>
Tensor<T> CMixer<T>::forward(const Tensor<T>& x, bool training) {
  auto w = wave.forward(x);
  auto e = spatial.forward(expand.forward(w), training);
  return project.forward(se.forward(e));
}

template <class T>
void CMixer<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  wave.collect(prefix + ".wave", out);
  expand.collect(prefix + ".expand", out);
  spatial.collect(prefix + ".spatial", out);
  se.collect(prefix + ".se", out);
  project.collect(prefix + ".project", out);
}

template <class T>
void CMixer<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  wave.cost(report, prefix + ".wave", e);
  const Extent wide = expand.cost(report, prefix + ".expand", e);
  spatial.cost(report, prefix + ".spatial", wide);
  se.cost(report, prefix + ".se", wide);
  project.cost(report, prefix + ".project", wide);
}

// ---------------------------------------------------------------------------
// Block

template <class T>
Block<T>::Block(std::size_t c, const BlockOptions& opts, ParamInit& init)
    : channels(c),
      norm1(opts.mixer_norm, c),
      smixer(c, opts, init),
      norm2(opts.mixer_norm, c),
      cmixer(c, opts, init) {}

template <class T>
Tensor<T> Block<T>::forward(const Tensor<T>& x, bool training) {
  auto y = add(x, smixer.forward(norm1.forward(x, training), training));
  return add(y, cmixer.forward(norm2.forward(y, training), training));
}

template <class T>
void Block<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  norm1.collect(prefix + ".norm1", out);
  smixer.collect(prefix + ".smixer", out);
  norm2.collect(prefix + ".norm2", out);
  cmixer.collect(prefix + ".cmixer", out);
}

template <class T>
void Block<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  norm1.cost(report, prefix + ".norm1", e);
  smixer.cost(report, prefix + ".smixer", e);
  report.add(elementwise_row(prefix + ".residual1", "add", e));
  norm2.cost(report, prefix + ".norm2", e);
  cmixer.cost(report, prefix + ".cmixer", e);
  report.add(elementwise_row(prefix + ".residual2", "add", e));
}

template <class T>
void Block<T>::zero_final_projections() {
  smixer.fuse.zero();
  cmixer.project.zero();
}

#define SPARTAN_INSTANTIATE_BLOCKS(T)                                                        \
  template struct ConvUnit<T>;                                                               \
  template class SMixer<T>;                                                                  \
  template class WaveAggregate<T>;                                                           \
  template class CMixer<T>;                                                                  \
  template class Block<T>;                                                                   \
  template std::pair<Tensor<T>, Tensor<T>> complex_modulate(const Tensor<T>&, const Tensor<T>&, \
                                                            const Tensor<T>&, const Tensor<T>&);

SPARTAN_INSTANTIATE_BLOCKS(float)
SPARTAN_INSTANTIATE_BLOCKS(double)

}  // namespace spartan

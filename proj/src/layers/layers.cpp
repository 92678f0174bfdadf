#include "spartan/layers.hpp"

namespace spartan {

Conv2dOptions same_padding(std::size_t kernel, std::size_t dilation, std::size_t groups) {
  Conv2dOptions o;
  o.stride = 1;
  o.dilation = dilation;
  o.padding = dilation * (kernel - 1) / 2;
  o.groups = groups;
  return o;
}

// ---------------------------------------------------------------------------
// Conv2d

template <class T>
Conv2d<T>::Conv2d(std::size_t in, std::size_t out, std::size_t k, Conv2dOptions o, bool with_bias,
                  ParamInit& init)
    : in_channels(in), out_channels(out), kernel(k), opts(o) {
  if (o.groups == 0 || in % o.groups != 0 || out % o.groups != 0) {
    throw ConfigError("conv: groups=" + std::to_string(o.groups) + " must divide " +
                      std::to_string(in) + " -> " + std::to_string(out) + " channels");
  }
  weight = Tensor<T>::zeros({out, in / o.groups, k, k});
  init.trunc_normal(weight, kInitStd);
  if (with_bias) bias = Tensor<T>::zeros({out});
}

template <class T>
void Conv2d<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  if (bias.defined()) out.push_back({prefix + ".bias", bias, true});
}

template <class T>
Extent Conv2d<T>::cost(CostReport& report, const std::string& prefix, const Extent& in) const {
  const Extent out{out_channels, conv_out_extent(in.h, kernel, opts), conv_out_extent(in.w, kernel, opts)};
  CostRow row;
  row.name = prefix;
  row.kind = opts.groups == 1 ? "conv" : (opts.groups == in_channels ? "dwconv" : "gconv");
  row.params = weight.numel() + bias.numel();
  row.macs = conv_macs(in_channels, out_channels, kernel, kernel, opts.groups, out.h, out.w);
  row.mem_access = conv_mem_access(in_channels, out_channels, kernel, kernel, opts.groups, in, out) +
                   bias.numel();
  row.tensors.push_back(prefix + ".weight");
  if (bias.defined()) row.tensors.push_back(prefix + ".bias");
  report.add(std::move(row));
  return out;
}

template <class T>
void Conv2d<T>::zero() {
  for (auto& v : weight.mutable_data()) v = T{0};
  for (auto& v : bias.mutable_data()) v = T{0};
}

// ---------------------------------------------------------------------------
// Linear

template <class T>
Linear<T>::Linear(std::size_t in, std::size_t out, ParamInit& init) {
  weight = Tensor<T>::zeros({out, in});
  init.trunc_normal(weight, kInitStd);
  bias = Tensor<T>::zeros({out});
}

template <class T>
void Linear<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.push_back({prefix + ".weight", weight, true});
  out.push_back({prefix + ".bias", bias, true});
}

template <class T>
void Linear<T>::cost(CostReport& report, const std::string& prefix) const {
  const std::size_t out = weight.dim(0), in = weight.dim(1);
  CostRow row;
  row.name = prefix;
  row.kind = "linear";
  row.params = weight.numel() + bias.numel();
  row.macs = static_cast<std::uint64_t>(in) * out;
  row.mem_access = row.params + in + out;
  row.spatial = false;
  row.tensors = {prefix + ".weight", prefix + ".bias"};
  report.add(std::move(row));
}

// ---------------------------------------------------------------------------
// Norm2d

NormKind parse_norm(std::string_view name) {
  if (name == "batchnorm") return NormKind::batchnorm;
  if (name == "layernorm") return NormKind::layernorm;
  throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

std::string_view norm_name(NormKind kind) {
  return kind == NormKind::batchnorm ? "batchnorm" : "layernorm";
}

template <class T>
Norm2d<T>::Norm2d(NormKind k, std::size_t channels)
    : kind(k),
      gamma(Tensor<T>::ones({channels})),
      beta(Tensor<T>::zeros({channels})),
      eps(k == NormKind::batchnorm ? 1e-5 : 1e-6) {
  if (kind == NormKind::batchnorm) {
    running_mean = Tensor<T>::zeros({channels});
    running_var = Tensor<T>::ones({channels});
  }
}

template <class T>
Tensor<T> Norm2d<T>::forward(const Tensor<T>& x, bool training) {
  if (kind == NormKind::layernorm) return layernorm_channels(x, gamma, beta, eps);
  BatchNormOptions o;
  o.eps = eps;
  o.momentum = momentum;
  o.training = training;
  return batchnorm2d(x, gamma, beta, running_mean, running_var, o);
}

template <class T>
void Norm2d<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  out.push_back({prefix + ".gamma", gamma, true});
  out.push_back({prefix + ".beta", beta, true});
  if (kind == NormKind::batchnorm) {
    out.push_back({prefix + ".running_mean", running_mean, false});
    out.push_back({prefix + ".running_var", running_var, false});
  }
}

template <class T>
void Norm2d<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  report.add(elementwise_row(prefix, std::string(norm_name(kind)), e, 1, gamma.numel() + beta.numel(),
                             {prefix + ".gamma", prefix + ".beta"}));
}

// ---------------------------------------------------------------------------
// SqueezeExcite

template <class T>
SqueezeExcite<T>::SqueezeExcite(std::size_t c, std::size_t r, ParamInit& init)
    : channels(c), reduction(r) {
  if (r == 0 || c % r != 0) {
    throw ConfigError("SE: reduction " + std::to_string(r) + " does not divide " +
                      std::to_string(c) + " channels");
  }
  reduce = Linear<T>(c, c / r, init);
  expand = Linear<T>(c / r, c, init);
}

template <class T>
Tensor<T> SqueezeExcite<T>::gate(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw ShapeError("SE: expected " + std::to_string(channels) + " channels, got " +
                     shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0);
  auto squeezed = reshape(gap(x), Shape{n, channels});
  auto hidden = activation(reduce.forward(squeezed), Activation::relu);
  return activation(expand.forward(hidden), Activation::sigmoid);
}

template <class T>
Tensor<T> SqueezeExcite<T>::forward(const Tensor<T>& x) const {
  auto g = gate(x);
  return mul(x, reshape(g, Shape{x.dim(0), channels, 1, 1}));
}

template <class T>
void SqueezeExcite<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  reduce.collect(prefix + ".reduce", out);
  expand.collect(prefix + ".expand", out);
}

template <class T>
void SqueezeExcite<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  reduce.cost(report, prefix + ".reduce");
  expand.cost(report, prefix + ".expand");
  // squeeze (GAP) + channel scaling
  report.add(elementwise_row(prefix + ".gate", "se", e, 2));
}

// ---------------------------------------------------------------------------
// FeatureDecompose

template <class T>
FeatureDecompose<T>::FeatureDecompose(std::size_t channels, ParamInit& init)
    : proj(channels, channels, 1, Conv2dOptions{}, true, init),
      gamma(Tensor<T>::zeros({channels})) {}

template <class T>
Tensor<T> FeatureDecompose<T>::forward(const Tensor<T>& x) const {
  auto y = proj.forward(x);
  return add(y, mul(channel_view(gamma), sub(y, gap(y))));
}

template <class T>
void FeatureDecompose<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  proj.collect(prefix + ".proj", out);
  out.push_back({prefix + ".gamma", gamma, true});
}

template <class T>
void FeatureDecompose<T>::cost(CostReport& report, const std::string& prefix, const Extent& e) const {
  proj.cost(report, prefix + ".proj", e);
  // gap, subtract, scale, add
  report.add(elementwise_row(prefix + ".reweight", "fd", e, 4, gamma.numel(), {prefix + ".gamma"}));
}

// ---------------------------------------------------------------------------
// PatchEmbed

EmbedVariant parse_embed_variant(std::string_view name) {
  if (name == "overlapping") return EmbedVariant::overlapping;
  if (name == "nonoverlapping") return EmbedVariant::nonoverlapping;
  throw ConfigError("unknown embed variant '" + std::string(name) + "'");
}

std::string_view embed_variant_name(EmbedVariant v) {
  return v == EmbedVariant::overlapping ? "overlapping" : "nonoverlapping";
}

template <class T>
PatchEmbed<T>::PatchEmbed(EmbedVariant v, std::size_t in, std::size_t out, NormKind norm,
                          Activation a, ParamInit& init)
    : variant(v), act(a) {
  if (variant == EmbedVariant::overlapping) {
    if (out % 2 != 0) throw ConfigError("overlapping patch embed needs an even channel count");
    Conv2dOptions o;
    o.stride = 2;
    o.padding = 1;
    conv1 = Conv2d<T>(in, out / 2, 3, o, false, init);
    norm1 = Norm2d<T>(norm, out / 2);
    conv2 = Conv2d<T>(out / 2, out, 3, o, false, init);
    norm2 = Norm2d<T>(norm, out);
  } else {
    Conv2dOptions o;
    o.stride = 2;
    conv1 = Conv2d<T>(in, out, 2, o, false, init);
    norm1 = Norm2d<T>(norm, out);
  }
}

template <class T>
Tensor<T> PatchEmbed<T>::forward(const Tensor<T>& x, bool training) {
  if (x.rank() != 4) throw ShapeError("patch embed: input must be NCHW, got " + shape_str(x.shape()));
  const std::size_t s = total_stride();
  if (x.dim(2) % s != 0 || x.dim(3) % s != 0) {
    throw ConfigError("patch embed (" + std::string(embed_variant_name(variant)) + "): resolution " +
                      std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                      " not divisible by " + std::to_string(s));
  }
  auto y = norm1.forward(conv1.forward(x), training);
  if (variant == EmbedVariant::nonoverlapping) return y;
  y = activation(y, act);
  y = norm2.forward(conv2.forward(y), training);
  return activation(y, act);
}

template <class T>
void PatchEmbed<T>::collect(const std::string& prefix, NamedTensors<T>& out) const {
  conv1.collect(prefix + ".conv1", out);
  norm1.collect(prefix + ".norm1", out);
  if (variant == EmbedVariant::overlapping) {
    conv2.collect(prefix + ".conv2", out);
    norm2.collect(prefix + ".norm2", out);
  }
}

template <class T>
Extent PatchEmbed<T>::cost(CostReport& report, const std::string& prefix, const Extent& in) const {
  Extent e = conv1.cost(report, prefix + ".conv1", in);
  norm1.cost(report, prefix + ".norm1", e);
  if (variant == EmbedVariant::nonoverlapping) return e;
  report.add(elementwise_row(prefix + ".act1", "activation", e));
  e = conv2.cost(report, prefix + ".conv2", e);
  norm2.cost(report, prefix + ".norm2", e);
  report.add(elementwise_row(prefix + ".act2", "activation", e));
  return e;
}

template class Conv2d<float>;
template class Conv2d<double>;
template class Linear<float>;
template class Linear<double>;
template class Norm2d<float>;
template class Norm2d<double>;
template class SqueezeExcite<float>;
template class SqueezeExcite<double>;
template class FeatureDecompose<float>;
template class FeatureDecompose<double>;
template class PatchEmbed<float>;
template class PatchEmbed<double>;

}  // namespace spartan

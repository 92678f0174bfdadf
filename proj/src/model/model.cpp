#include "spartan/model.hpp"

#include <cstring>

namespace spartan {

template <class T>
Model<T> Model<T>::build(const ModelConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Model m;
  m.cfg_ = cfg;
  ParamInit init(seed);
  std::size_t in = cfg.in_channels;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& sc = cfg.stages[s];
    auto& stage = m.stages_[s];
    stage.embed = PatchEmbed<T>(sc.embed_variant, in, sc.channels, cfg.conv_norm,
                                cfg.embed_activation, init);
    const auto opts = cfg.block_options(s);
    for (std::size_t b = 0; b < sc.num_blocks; ++b) stage.blocks.emplace_back(sc.channels, opts, init);
    in = sc.channels;
  }
  m.final_norm_ = Norm2d<T>(cfg.mixer_norm, in);
  m.head_ = Linear<T>(in, cfg.num_classes, init);
  for (auto& nt : m.named_tensors())
    if (nt.learnable) nt.tensor.set_requires_grad(true);
  return m;
}

template <class T>
void Model<T>::check_input(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != cfg_.in_channels) {
    throw ShapeError("model input must be [N," + std::to_string(cfg_.in_channels) + ",H,W], got " +
                     shape_str(x.shape()));
  }
  if (x.dim(2) % kModelStride != 0 || x.dim(3) % kModelStride != 0) {
    throw InputError("input resolution " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                     " is not divisible by " + std::to_string(kModelStride));
  }
}

template <class T>
std::vector<Tensor<T>> Model<T>::stage_outputs(const Tensor<T>& x, bool training) {
  check_input(x);
  std::vector<Tensor<T>> outs;
  Tensor<T> y = x;
  for (auto& stage : stages_) {
    y = stage.embed.forward(y, training);
    for (auto& block : stage.blocks) y = block.forward(y, training);
    outs.push_back(y);
  }
  return outs;
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, bool training) {
  auto y = stage_outputs(x, training).back();
  y = gap(final_norm_.forward(y, training));
  return head_.forward(reshape(y, Shape{y.dim(0), y.dim(1)}));
}

template <class T>
NamedTensors<T> Model<T>::named_tensors() const {
  NamedTensors<T> out;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string prefix = "stages." + std::to_string(s);
    stages_[s].embed.collect(prefix + ".embed", out);
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      stages_[s].blocks[b].collect(prefix + ".blocks." + std::to_string(b), out);
    }
  }
  final_norm_.collect("final_norm", out);
  head_.collect("head", out);
  return out;
}

template <class T>
std::vector<Tensor<T>> Model<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (auto& nt : named_tensors())
    if (nt.learnable) out.push_back(nt.tensor);
  return out;
}

template <class T>
std::vector<Extent> Model<T>::stage_extents(std::size_t height, std::size_t width) const {
  std::vector<Extent> out;
  std::size_t h = height, w = width;
  for (std::size_t s = 0; s < 4; ++s) {
    const std::size_t stride = stages_[s].embed.total_stride();
    h /= stride;
    w /= stride;
    out.push_back({cfg_.stages[s].channels, h, w});
  }
  return out;
}

template <class T>
CostReport Model<T>::costs(std::size_t height, std::size_t width) const {
  if (height == 0 || width == 0 || height % kModelStride != 0 || width % kModelStride != 0) {
    throw InputError("cost resolution " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by " + std::to_string(kModelStride));
  }
  CostReport report;
  report.height = height;
  report.width = width;
  Extent e{cfg_.in_channels, height, width};
  for (std::size_t s = 0; s < 4; ++s) {
    const std::string prefix = "stages." + std::to_string(s);
    e = stages_[s].embed.cost(report, prefix + ".embed", e);
    for (std::size_t b = 0; b < stages_[s].blocks.size(); ++b) {
      stages_[s].blocks[b].cost(report, prefix + ".blocks." + std::to_string(b), e);
    }
  }
  final_norm_.cost(report, "final_norm", e);
  report.add(elementwise_row("gap", "pool", e));
  head_.cost(report, "head");
  return report;
}

template <class T>
std::uint64_t parameter_checksum(const Model<T>& model) {
  std::uint64_t sum = 0;
  for (const auto& nt : model.named_tensors()) {
    for (T v : nt.tensor.data()) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, &v, sizeof(T));
      sum = sum * 1099511628211ULL + bits;
    }
  }
  return sum;
}

template class Model<float>;
template class Model<double>;
template std::uint64_t parameter_checksum(const Model<float>&);
template std::uint64_t parameter_checksum(const Model<double>&);

}  // namespace spartan

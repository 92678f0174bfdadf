#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "spartan/blocks.hpp"
#include "spartan/gradcheck.hpp"

using namespace spartan;
using testing_util::randn;

namespace {

BlockOptions small_opts(ConvType type, KernelVariant kv) {
  BlockOptions o;
  o.conv_type = type;
  o.kernel_variant = kv;
  o.se_reduction = 2;
  o.expand_ratio = 2;
  return o;
}

std::uint64_t low_conv_params(const CostReport& r) {
  std::uint64_t p = 0;
  for (const auto& row : r.rows)
    if (row.name.find(".low") != std::string::npos && row.name.ends_with(".conv")) p += row.params;
  return p;
}

// Nonzero mask of the low branch for a positive impulse at the centre.
std::vector<bool> low_support(KernelVariant kv, std::size_t size) {
  ParamInit init(0);
  SMixer<double> sm(8, small_opts(ConvType::full, kv), init);
  for (auto& u : sm.low)
    for (auto& v : u.conv.weight.mutable_data()) v = 1.0;
  TensorD x({1, 4, size, size}, 0.0);
  for (std::size_t c = 0; c < 4; ++c) x.mutable_data()[(c * size + size / 2) * size + size / 2] = 1.0;
  auto y = sm.low_branch(x, false);
  std::vector<bool> mask(size * size);
  for (std::size_t q = 0; q < size * size; ++q) mask[q] = y.at(0, 0, q / size, q % size) != 0.0;
  return mask;
}

}  // namespace

TEST(Block, PreservesShape) {
  ParamInit init(1);
  std::mt19937_64 rng(1);
  for (auto type : {ConvType::full, ConvType::depthwise})
    for (auto kv : {KernelVariant::stacked3, KernelVariant::single5}) {
      Block<float> b(16, small_opts(type, kv), init);
      auto x = randn<float>({2, 16, 7, 9}, rng);
      EXPECT_EQ(b.forward(x, true).shape(), x.shape());
      EXPECT_EQ(b.forward(x, false).shape(), x.shape());
    }
}

TEST(Block, ZeroedProjectionsGiveIdentity) {
  ParamInit init(2);
  std::mt19937_64 rng(2);
  Block<float> b(16, small_opts(ConvType::full, KernelVariant::stacked3), init);
  b.zero_final_projections();
  auto x = randn<float>({2, 16, 6, 6}, rng);
  auto y = b.forward(x, true);
  for (std::size_t i = 0; i < x.numel(); ++i) ASSERT_EQ(y.data()[i], x.data()[i]);
}

TEST(Block, OddChannelsRejected) {
  ParamInit init(3);
  EXPECT_THROW(Block<float>(15, small_opts(ConvType::full, KernelVariant::stacked3), init), ConfigError);
}

TEST(SMixer, LowBranchReceptiveField) {
  constexpr std::size_t n = 15;
  auto stacked = low_support(KernelVariant::stacked3, n);
  auto single = low_support(KernelVariant::single5, n);
  EXPECT_EQ(stacked, single);
  std::size_t lo = n, hi = 0, count = 0;
  for (std::size_t q = 0; q < n * n; ++q)
    if (stacked[q]) {
      lo = std::min({lo, q / n, q % n});
      hi = std::max({hi, q / n, q % n});
      ++count;
    }
  EXPECT_EQ(hi - lo + 1, 9u);
  EXPECT_EQ(count, 25u);  // dilation 2 leaves every other tap
}

TEST(SMixer, StackedUsesFewerWeights) {
  ParamInit init(4);
  CostReport stacked, single;
  SMixer<float>(32, small_opts(ConvType::full, KernelVariant::stacked3), init).cost(stacked, "s", Extent{32, 8, 8});
  SMixer<float>(32, small_opts(ConvType::full, KernelVariant::single5), init).cost(single, "s", Extent{32, 8, 8});
  EXPECT_DOUBLE_EQ(static_cast<double>(low_conv_params(stacked)) / low_conv_params(single), 18.0 / 25.0);
}

TEST(SMixer, DepthwiseGroups) {
  ParamInit init(5);
  SMixer<float> sm(16, small_opts(ConvType::depthwise, KernelVariant::stacked3), init);
  EXPECT_EQ(sm.high.conv.opts.groups, 8u);
  EXPECT_EQ(sm.high.conv.weight.shape(), (Shape{8, 1, 3, 3}));
  EXPECT_EQ(sm.low.size(), 2u);
  EXPECT_EQ(sm.low[0].conv.opts.dilation, 2u);
}

TEST(Wave, UnitWeightIsIdentity) {
  std::mt19937_64 rng(6);
  auto re = randn<double>({2, 3, 4, 4}, rng), im = randn<double>({2, 3, 4, 4}, rng);
  auto [r2, i2] = complex_modulate(re, im, TensorD::ones({3}), TensorD::zeros({3}));
  EXPECT_EQ(testing_util::max_abs_diff(r2, re), 0.0);
  EXPECT_EQ(testing_util::max_abs_diff(i2, im), 0.0);
}

TEST(Wave, RotationsCompose) {
  std::mt19937_64 rng(7);
  auto re = randn<double>({1, 2, 3, 3}, rng), im = randn<double>({1, 2, 3, 3}, rng);
  const double t1 = 0.4, t2 = -1.3;
  auto rot = [](double t) {
    return std::pair{TensorD({2}, std::vector<double>{std::cos(t), std::cos(t)}),
                     TensorD({2}, std::vector<double>{std::sin(t), std::sin(t)})};
  };
  auto [a1, b1] = rot(t1);
  auto [a2, b2] = rot(t2);
  auto [a3, b3] = rot(t1 + t2);
  auto [r1, i1] = complex_modulate(re, im, a1, b1);
  auto [r12, i12] = complex_modulate(r1, i1, a2, b2);
  auto [r3, i3] = complex_modulate(re, im, a3, b3);
  EXPECT_LT(testing_util::max_abs_diff(r12, r3), 1e-12);
  EXPECT_LT(testing_util::max_abs_diff(i12, i3), 1e-12);
  // unit rotation keeps the modulus
  for (std::size_t i = 0; i < re.numel(); ++i)
    EXPECT_NEAR(std::hypot(r1.data()[i], i1.data()[i]), std::hypot(re.data()[i], im.data()[i]), 1e-12);
}

TEST(Wave, ModulateMatchesComplexProduct) {
  std::mt19937_64 rng(8);
  auto re = randn<double>({1, 3, 2, 2}, rng), im = randn<double>({1, 3, 2, 2}, rng);
  auto a = randn<double>({3}, rng), b = randn<double>({3}, rng);
  auto [r2, i2] = complex_modulate(re, im, a, b);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t q = 0; q < 4; ++q) {
      const std::complex<double> z(re.at(0, c, q / 2, q % 2), im.at(0, c, q / 2, q % 2));
      const auto w = std::complex<double>(a.data()[c], b.data()[c]) * z;
      EXPECT_NEAR(r2.at(0, c, q / 2, q % 2), w.real(), 1e-14);
      EXPECT_NEAR(i2.at(0, c, q / 2, q % 2), w.imag(), 1e-14);
    }
}

TEST(Wave, SuperpositionIsMonotone) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> bump(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = randn<double>({1, 5, 3, 3}, rng);
    TensorD x2 = x.detach();
    for (auto& v : x2.mutable_data()) v += bump(rng);
    auto s1 = add(x, channel_max(x)), s2 = add(x2, channel_max(x2));
    for (std::size_t i = 0; i < s1.numel(); ++i) ASSERT_GE(s2.data()[i], s1.data()[i]);
    // the max term is shared by every channel at a position
    for (std::size_t c = 0; c < 5; ++c) ASSERT_NEAR(s1.at(0, c, 1, 1) - x.at(0, c, 1, 1), s1.at(0, 0, 1, 1) - x.at(0, 0, 1, 1), 1e-12);
  }
}

TEST(Wave, InitialStateAndNames) {
  ParamInit init(10);
  WaveAggregate<float> w(8, Activation::gelu, init);
  EXPECT_EQ(w.a.shape(), (Shape{4}));
  for (float v : w.a.data()) EXPECT_EQ(v, 1.0f);
  for (float v : w.b.data()) EXPECT_EQ(v, 0.0f);
  NamedTensors<float> named;
  w.collect("wave", named);
  EXPECT_EQ(named.back().name, "wave.b");
}

TEST(CMixer, HiddenWidth) {
  ParamInit init(11);
  BlockOptions o;
  o.expand_ratio = 2;
  CMixer<float> cm(96, o, init);
  EXPECT_EQ(cm.hidden, 192u);
  EXPECT_EQ(cm.expand.weight.shape(), (Shape{192, 96, 1, 1}));
  EXPECT_EQ(cm.spatial.conv.opts.groups, 192u);
  EXPECT_EQ(cm.project.weight.shape(), (Shape{96, 192, 1, 1}));
}

TEST(Block, GradcheckSmall) {
  ParamInit init(12);
  std::mt19937_64 rng(12);
  Block<double> b(8, small_opts(ConvType::depthwise, KernelVariant::single5), init);
  NamedTensors<double> named;
  b.collect("block", named);
  std::vector<GradcheckInput> inputs;
  for (auto& nt : named) {
    if (!nt.learnable) continue;
    for (auto& v : nt.tensor.mutable_data()) v = std::normal_distribution<>(0, 0.5)(rng);
    inputs.push_back({nt.name, nt.tensor});
  }
  auto x = randn<double>({2, 8, 6, 6}, rng);
  inputs.push_back({"x", x});
  auto r = gradcheck([&] { return b.forward(x, true); }, inputs);
  EXPECT_TRUE(r.passed) << r.worst_location << " " << r.max_rel_error;
}

#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <optional>
#include <random>

#include "helpers.hpp"
#include "oracles.hpp"
#include "spartan/ops.hpp"

using namespace spartan;
using testing_util::randn;

TEST(Tensor, ConstructionAndAccess) {
  TensorF t({2, 3, 1, 2}, 1.5f);
  EXPECT_EQ(t.numel(), 12u);
  EXPECT_EQ(t.rank(), 4u);
  EXPECT_FLOAT_EQ(t.at(1, 2, 0, 1), 1.5f);
  EXPECT_THROW(TensorF({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
  EXPECT_THROW(TensorF({2}).item(), Error);
}

TEST(Ops, GapMean) {
  TensorD x({1, 2, 2, 2}, std::vector<double>{1, 2, 3, 4, -1, -1, -1, 5});
  auto y = gap(x);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 1, 1}));
  EXPECT_DOUBLE_EQ(y.data()[0], 2.5);
  EXPECT_DOUBLE_EQ(y.data()[1], 0.5);
}

TEST(Ops, GeluMatchesTanhForm) {
  std::vector<double> xs;
  for (double v = -6.0; v <= 6.0; v += 0.25) xs.push_back(v);
  TensorD x({1, 1, 1, xs.size()}, xs);
  auto y = activation(x, Activation::gelu);
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(y.data()[i], oracle::gelu_tanh(xs[i]), 1e-12);
}

TEST(Ops, OtherActivations) {
  TensorD x({1, 1, 1, 3}, std::vector<double>{-2.0, 0.0, 3.0});
  auto r = activation(x, Activation::relu);
  EXPECT_EQ(r.data()[0], 0.0);
  EXPECT_EQ(r.data()[2], 3.0);
  auto s = activation(x, Activation::sigmoid);
  EXPECT_NEAR(s.data()[1], 0.5, 1e-15);
  EXPECT_NEAR(s.data()[2], 1.0 / (1.0 + std::exp(-3.0)), 1e-14);
  auto si = activation(x, Activation::silu);
  EXPECT_NEAR(si.data()[0], -2.0 / (1.0 + std::exp(2.0)), 1e-14);
  EXPECT_THROW(parse_activation("swish2"), ConfigError);
}

TEST(Ops, LinearMatchesHandComputation) {
  TensorD x({2, 3}, std::vector<double>{1, 2, 3, -1, 0, 1});
  TensorD w({2, 3}, std::vector<double>{1, 0, -1, 0.5, 0.5, 0.5});
  TensorD b({2}, std::vector<double>{0.25, -1});
  auto y = linear(x, w, b);
  EXPECT_EQ(y.shape(), (Shape{2, 2}));
  EXPECT_DOUBLE_EQ(y.data()[0], -2 + 0.25);
  EXPECT_DOUBLE_EQ(y.data()[1], 3 - 1);
  EXPECT_DOUBLE_EQ(y.data()[2], -2 + 0.25);
  EXPECT_DOUBLE_EQ(y.data()[3], 0 - 1);
}

TEST(Ops, ConcatSplitRoundTrip) {
  std::mt19937_64 rng(3);
  auto a = randn<double>({2, 3, 2, 2}, rng);
  auto b = randn<double>({2, 1, 2, 2}, rng);
  auto cat = channel_concat(a, b);
  EXPECT_EQ(cat.shape(), (Shape{2, 4, 2, 2}));
  auto [lo, hi] = channel_split(cat, 3);
  EXPECT_EQ(testing_util::max_abs_diff(lo, a), 0.0);
  EXPECT_EQ(testing_util::max_abs_diff(hi, b), 0.0);
  EXPECT_DOUBLE_EQ(cat.at(1, 3, 1, 0), b.at(1, 0, 1, 0));
}

TEST(Ops, ChannelMax) {
  TensorD x({1, 3, 1, 2}, std::vector<double>{1, -5, 4, -6, 2, -7});
  auto y = channel_max(x);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_DOUBLE_EQ(y.data()[0], 4);
  EXPECT_DOUBLE_EQ(y.data()[1], -5);
}

TEST(Ops, BroadcastShapeLaw) {
  // Independent rule: right-align, each pair must be equal or contain a 1.
  auto oracle_shape = [](Shape a, Shape b) -> std::optional<Shape> {
    while (a.size() < b.size()) a.insert(a.begin(), 1);
    while (b.size() < a.size()) b.insert(b.begin(), 1);
    Shape out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] != b[i] && a[i] != 1 && b[i] != 1) return std::nullopt;
      out[i] = std::max(a[i], b[i]);
    }
    return out;
  };
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(1, 3), r(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    Shape a(r(rng)), b(r(rng));
    for (auto& v : a) v = d(rng);
    for (auto& v : b) v = d(rng);
    auto expect = oracle_shape(a, b);
    if (!expect) {
      EXPECT_THROW(broadcast_shape(a, b), ShapeError);
      continue;
    }
    EXPECT_EQ(broadcast_shape(a, b), *expect);
    // values: out[i] = a[ia] * b[ib] checked by index arithmetic
    auto ta = randn<double>(a, rng), tb = randn<double>(b, rng);
    auto y = mul(ta, tb);
    ASSERT_EQ(y.shape(), *expect);
    Shape pa = a, pb = b;
    while (pa.size() < expect->size()) pa.insert(pa.begin(), 1);
    while (pb.size() < expect->size()) pb.insert(pb.begin(), 1);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      std::size_t rem = i, ia = 0, ib = 0, sa = 1, sb = 1;
      for (std::size_t k = expect->size(); k-- > 0;) {
        const std::size_t idx = rem % (*expect)[k];
        rem /= (*expect)[k];
        ia += (pa[k] == 1 ? 0 : idx) * sa;
        ib += (pb[k] == 1 ? 0 : idx) * sb;
        sa *= pa[k];
        sb *= pb[k];
      }
      ASSERT_DOUBLE_EQ(y.data()[i], ta.data()[ia] * tb.data()[ib]);
    }
  }
}

TEST(Ops, LayerNormShiftScaleInvariant) {
  std::mt19937_64 rng(5);
  auto x = randn<double>({2, 6, 3, 3}, rng);
  auto g = TensorD::ones({6}), b = TensorD::zeros({6});
  auto y = layernorm_channels(x, g, b, 1e-12);
  TensorD x2 = x.detach();
  auto d = x2.mutable_data();
  for (auto& v : d) v = 3.0 * v + 7.0;
  auto y2 = layernorm_channels(x2, g, b, 1e-12);
  EXPECT_LT(testing_util::max_abs_diff(y, y2), 1e-9);
  // per-position mean 0, variance 1
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t w = 0; w < 3; ++w) {
        double m = 0, v = 0;
        for (std::size_t c = 0; c < 6; ++c) m += y.at(n, c, h, w);
        m /= 6;
        for (std::size_t c = 0; c < 6; ++c) v += std::pow(y.at(n, c, h, w) - m, 2);
        EXPECT_NEAR(m, 0.0, 1e-12);
        EXPECT_NEAR(v / 6, 1.0, 1e-9);
      }
}

TEST(Ops, BatchNormTrainingNormalizesAndTracks) {
  std::mt19937_64 rng(6);
  auto x = randn<double>({4, 3, 2, 2}, rng, 2.0);
  auto g = TensorD::ones({3}), b = TensorD::zeros({3});
  auto rm = TensorD::zeros({3}), rv = TensorD::ones({3});
  auto y = batchnorm2d(x, g, b, rm, rv, BatchNormOptions{});
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0, xm = 0, xv = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t q = 0; q < 4; ++q) {
        m += y.at(n, c, q / 2, q % 2);
        xm += x.at(n, c, q / 2, q % 2);
      }
    m /= 16;
    xm /= 16;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t q = 0; q < 4; ++q) {
        v += std::pow(y.at(n, c, q / 2, q % 2) - m, 2);
        xv += std::pow(x.at(n, c, q / 2, q % 2) - xm, 2);
      }
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 16, 1.0, 1e-4);
    EXPECT_NEAR(rm.data()[c], 0.1 * xm, 1e-12);
    EXPECT_NEAR(rv.data()[c], 0.9 + 0.1 * xv / 15, 1e-12);
  }
  // eval mode uses the buffers
  BatchNormOptions eval;
  eval.training = false;
  auto rm2 = rm, rv2 = rv;
  auto ye = batchnorm2d(x, g, b, rm2, rv2, eval);
  EXPECT_NEAR(ye.at(0, 1, 0, 0), (x.at(0, 1, 0, 0) - rm.data()[1]) / std::sqrt(rv.data()[1] + 1e-5), 1e-12);
}

TEST(Autograd, SumAndSquare) {
  TensorD x({3}, std::vector<double>{1, -2, 0.5});
  x.set_requires_grad(true);
  auto loss = sum(mul(x, x));
  loss.backward();
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -4.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 1.0);
}

TEST(Autograd, DiamondAccumulates) {
  TensorD x({2}, std::vector<double>{3, 4});
  x.set_requires_grad(true);
  auto a = scale(x, 2.0);
  auto b = mul(x, x);
  sum(add(a, b)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 2 + 6);
  EXPECT_DOUBLE_EQ(x.grad()[1], 2 + 8);
  // a second backward accumulates into the same buffer
  sum(a).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 10);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Autograd, NonScalarBackwardRejected) {
  TensorD x({2}, 1.0);
  x.set_requires_grad(true);
  auto y = scale(x, 2.0);
  EXPECT_THROW(y.backward(), ContractError);
}

TEST(Autograd, NoGradGuardStopsRecording) {
  TensorD x({2}, 1.0);
  x.set_requires_grad(true);
  TensorD y;
  {
    NoGradGuard g;
    y = scale(x, 2.0);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(grad_enabled());
}

TEST(Autograd, RequiresGradOnlyOnLeaves) {
  TensorD x({2}, 1.0);
  x.set_requires_grad(true);
  auto y = scale(x, 2.0);
  EXPECT_FALSE(y.is_leaf());
  EXPECT_THROW(y.set_requires_grad(false), ContractError);
}

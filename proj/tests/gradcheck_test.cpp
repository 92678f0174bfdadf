#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "helpers.hpp"
#include "spartan/cli.hpp"
#include "spartan/config.hpp"
#include "spartan/gradcheck.hpp"
#include "spartan/loss.hpp"
#include "spartan/ops.hpp"

using namespace spartan;
using testing_util::randn;

TEST(Gradcheck, LinearIsTight) {
  std::mt19937_64 rng(1);
  auto x = randn<double>({3, 4}, rng), w = randn<double>({2, 4}, rng), b = randn<double>({2}, rng);
  auto r = gradcheck([=] { return linear(x, w, b); }, {{"x", x}, {"w", w}, {"b", b}});
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.checked, 12u + 8u + 2u);
}

TEST(Gradcheck, ConvAndNorms) {
  std::mt19937_64 rng(2);
  auto x = randn<double>({2, 4, 5, 5}, rng), w = randn<double>({4, 2, 3, 3}, rng);
  Conv2dOptions o{1, 2, 2, 2};
  EXPECT_TRUE(gradcheck([=] { return conv2d(x, w, TensorD{}, o); }, {{"x", x}, {"w", w}}).passed);

  auto g = randn<double>({4}, rng), be = randn<double>({4}, rng);
  EXPECT_TRUE(gradcheck([=] { return layernorm_channels(x, g, be); }, {{"x", x}, {"g", g}, {"b", be}}).passed);
  auto rm = TensorD::zeros({4}), rv = TensorD::ones({4});
  EXPECT_TRUE(gradcheck([=]() mutable { return batchnorm2d(x, g, be, rm, rv, BatchNormOptions{}); },
                        {{"x", x}, {"g", g}, {"b", be}})
                  .passed);
}

TEST(Gradcheck, CrossEntropy) {
  std::mt19937_64 rng(3);
  auto z = randn<double>({5, 3}, rng);
  std::vector<std::int64_t> labels{0, 2, 1, 1, 0};
  EXPECT_TRUE(gradcheck([=] { return cross_entropy(z, labels); }, {{"z", z}}).passed);
}

TEST(Gradcheck, CatchesWrongBackward) {
  std::mt19937_64 rng(4);
  auto x = randn<double>({6}, rng);
  // square with a backward that is off by a factor of 1.5
  auto bad_square = [](const TensorD& in) {
    std::vector<double> out(in.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = in.data()[i] * in.data()[i];
    return detail::make_result<double>(in.shape(), std::move(out), "bad_square", {in},
                                       [=](std::span<const double> g, std::span<const double>) {
                                         auto gx = detail::grad_buffer(in);
                                         for (std::size_t i = 0; i < gx.size(); ++i)
                                           gx[i] += g[i] * 3.0 * in.data()[i];
                                       });
  };
  auto r = gradcheck([=] { return bad_square(x); }, {{"x", x}});
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 0.1);
  ASSERT_FALSE(r.mismatches.empty());
  EXPECT_EQ(r.mismatches[0].input, "x");
  EXPECT_NE(r.worst_location.find("x["), std::string::npos);
}

TEST(Gradcheck, NonFiniteIsReported) {
  TensorD x({3}, std::vector<double>{1.0, std::numeric_limits<double>::quiet_NaN(), 2.0});
  EXPECT_THROW(gradcheck([=] { return scale(x, 2.0); }, {{"x", x}}), NumericError);
}

TEST(Gradcheck, FullSuitePassesOnTinyPreset) {
  GradcheckOptions opts;
  opts.seed = 7;
  auto results = run_gradcheck_suite(preset("spartan-tiny"), opts);
  EXPECT_GE(results.size(), 20u);
  for (const auto& c : results) EXPECT_TRUE(c.report.passed) << c.name << " " << c.report.max_rel_error;
}

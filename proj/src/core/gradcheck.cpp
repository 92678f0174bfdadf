#include "spartan/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spartan/ops.hpp"

namespace spartan {

namespace {

double project(const TensorD& out, const std::vector<double>& weights) {
  const auto v = out.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) acc += v[i] * weights[i];
  return acc;
}

std::string location(const std::string& name, std::size_t index) {
  return name + "[" + std::to_string(index) + "]";
}

}  // namespace

GradcheckReport gradcheck(const std::function<TensorD()>& fn, std::vector<GradcheckInput> inputs,
                          const GradcheckOptions& opts) {
  for (auto& in : inputs) {
    if (!in.tensor.defined()) throw ContractError("gradcheck: input '" + in.name + "' is undefined");
    in.tensor.set_requires_grad(true);
    in.tensor.zero_grad();
  }

  // Analytic pass.
  TensorD out = fn();
  std::vector<double> weights(out.numel());
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (auto& w : weights) w = dist(rng);
  {
    TensorD proj(out.shape(), weights);
    TensorD loss = sum(mul(out, proj));
    loss.backward();
  }

  GradcheckReport report;
  for (auto& in : inputs) {
    const std::size_t n = in.tensor.numel();
    std::vector<double> analytic(n, 0.0);
    if (in.tensor.has_grad()) {
      auto g = in.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto data = in.tensor.mutable_data();
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = data[i];
      double plus, minus;
      {
        NoGradGuard guard;
        data[i] = saved + opts.eps;
        plus = project(fn(), weights);
        data[i] = saved - opts.eps;
        minus = project(fn(), weights);
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * opts.eps);
      const double a = analytic[i];
      if (!std::isfinite(a) || !std::isfinite(numeric)) {
        throw NumericError("gradcheck: non-finite gradient at " + location(in.name, i) +
                           " (analytic " + std::to_string(a) + ", numeric " +
                           std::to_string(numeric) + ")");
      }
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), opts.floor});
      ++report.checked;
      if (err > report.max_rel_error || report.worst_location.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        if (err >= report.max_rel_error) report.worst_location = location(in.name, i);
      }
      if (err >= opts.tol) {
        ++report.failed;
        if (report.mismatches.size() < opts.max_reported) {
          report.mismatches.push_back({in.name, i, a, numeric, err});
        }
      }
    }
  }
  report.passed = report.failed == 0;
  return report;
}

}  // namespace spartan

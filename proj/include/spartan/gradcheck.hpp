#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spartan/tensor.hpp"

namespace spartan {

struct GradcheckOptions {
  double eps = 1e-5;
  double tol = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  std::uint64_t seed = 0;  // seeds the random output projection
  std::size_t max_reported = 8;
};

struct GradcheckInput {
  std::string name;
  TensorD tensor;
};

struct GradcheckMismatch {
  std::string input;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::string worst_location;  // "<input>[<flat index>]"
  std::size_t checked = 0;
  std::size_t failed = 0;
  bool passed = true;
  std::vector<GradcheckMismatch> mismatches;  // first few entries above tol
};

/// Compares autodiff gradients with central finite differences.
///
/// `fn` is re-evaluated after perturbing single elements of the inputs in
/// place; it must be deterministic. The output is reduced to a scalar through
/// a fixed random projection so every output element contributes.
/// Throws NumericError (naming the location) on NaN/Inf in either gradient.
GradcheckReport gradcheck(const std::function<TensorD()>& fn, std::vector<GradcheckInput> inputs,
                          const GradcheckOptions& opts = {});

}  // namespace spartan

#include "spartan/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace spartan {

namespace {

template <class T>
void check_logits(const Tensor<T>& logits, std::span<const std::int64_t> labels, const char* who) {
  if (!logits.defined() || logits.rank() != 2 || logits.dim(1) < 2) {
    throw ShapeError(std::string(who) + ": logits must be [N, K] with K >= 2, got " +
                     (logits.defined() ? shape_str(logits.shape()) : std::string("undefined")));
  }
  if (labels.size() != logits.dim(0)) {
    throw ShapeError(std::string(who) + ": " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(logits.dim(0)) + " rows");
  }
  const auto k = static_cast<std::int64_t>(logits.dim(1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw DataError(std::string(who) + ": label " + std::to_string(labels[i]) + " at row " +
                      std::to_string(i) + " outside [0, " + std::to_string(k) + ")");
    }
  }
}

}  // namespace

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels) {
  check_logits(logits, labels, "cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  const T* z = logits.ptr();
  auto probs = std::make_shared<std::vector<T>>(n * k);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = z + i * k;
    const T mx = *std::max_element(row, row + k);
    T denom{0};
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - mx) / denom;
    total += static_cast<double>(std::log(denom) + mx - row[labels[i]]);
  }
  std::vector<std::int64_t> lab(labels.begin(), labels.end());
  return detail::make_result<T>(
      {1}, {static_cast<T>(total / static_cast<double>(n))}, "cross_entropy", {logits},
      [=](std::span<const T> gout, std::span<const T>) {
        auto gz = detail::grad_buffer(logits);
        const T g = gout[0] / static_cast<T>(n);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = static_cast<std::int64_t>(j) == lab[i] ? T{1} : T{0};
            gz[i * k + j] += g * ((*probs)[i * k + j] - onehot);
          }
        }
      });
}

template <class T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const std::int64_t> labels) {
  check_logits(logits, labels, "count_correct");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  const T* z = logits.ptr();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto arg = std::max_element(z + i * k, z + (i + 1) * k) - (z + i * k);
    if (arg == labels[i]) ++correct;
  }
  return correct;
}

template Tensor<float> cross_entropy(const Tensor<float>&, std::span<const std::int64_t>);
template Tensor<double> cross_entropy(const Tensor<double>&, std::span<const std::int64_t>);
template std::size_t count_correct(const Tensor<float>&, std::span<const std::int64_t>);
template std::size_t count_correct(const Tensor<double>&, std::span<const std::int64_t>);

}  // namespace spartan

#pragma once

#include <random>

#include "spartan/tensor.hpp"

namespace testing_util {

template <class T>
spartan::Tensor<T> randn(spartan::Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> dist(0.0, stddev);
  auto t = spartan::Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<T>(dist(rng));
  return t;
}

template <class T>
double max_abs_diff(const spartan::Tensor<T>& a, const spartan::Tensor<T>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return worst;
}

}  // namespace testing_util

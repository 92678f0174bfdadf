#pragma once

#include <cstdint>
#include <span>

#include "spartan/tensor.hpp"

namespace spartan {

/// Mean over the batch of -log softmax(logits)[label], max-subtracted.
/// Throws DataError for labels outside [0, K) and ShapeError unless logits are [N, K], K >= 2.
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> labels);

/// Number of rows whose argmax (first index on ties) equals the label.
template <class T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const std::int64_t> labels);

}  // namespace spartan

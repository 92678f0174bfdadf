#pragma once

#include <cstdint>

#include "spartan/dataset.hpp"
#include "spartan/model.hpp"
#include "spartan/optim.hpp"

namespace spartan {

struct TrainOptions {
  std::size_t batch_size = 64;
  Augment augment = Augment::flip_crop;
  std::uint64_t seed = 0;
};

struct EpochMetrics {
  double loss = 0.0;
  double top1 = 0.0;
  double lr = 0.0;  // last learning rate used
  std::size_t samples = 0;
};

struct EvalMetrics {
  double loss = 0.0;
  double top1 = 0.0;
  std::size_t samples = 0;
};

/// Batches per epoch; a trailing batch of a single sample is dropped
/// (BatchNorm needs two values per channel).
std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size);

/// One shuffled pass with forward/backward/AdamW per batch. The shuffle and
/// augmentation stream depend only on (seed, epoch). Throws NumericError if a
/// parameter becomes non-finite.
template <class T>
EpochMetrics train_epoch(Model<T>& model, const Dataset& ds, AdamW<T>& opt, const LRSchedule& sched,
                         const TrainOptions& opts, std::size_t epoch);

/// Eval-mode pass without gradients. Throws EmptyInputError on an empty set.
template <class T>
EvalMetrics evaluate(Model<T>& model, const Dataset& ds, std::size_t batch_size = 64);

}  // namespace spartan

#pragma once

#include <cstddef>
#include <vector>

#include "spartan/tensor.hpp"

namespace spartan {

struct AdamWOptions {
  double lr = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.03;
};

/// AdamW with decoupled weight decay: p -= lr·wd·p, then the bias-corrected
/// Adam update. Parameters without a gradient are treated as having a zero one.
template <class T>
class AdamW {
 public:
  AdamW(std::vector<Tensor<T>> params, AdamWOptions opts = {});

  /// One update at learning rate `lr`.
  void step(double lr);
  void step() { step(opts_.lr); }
  void zero_grad();

  std::size_t step_count() const { return steps_; }
  const AdamWOptions& options() const { return opts_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  std::vector<Tensor<T>> params_;
  AdamWOptions opts_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::size_t steps_ = 0;
};

struct LRSchedule {
  double base_lr = 2.5e-4;
  double min_lr = 0.0;
  std::size_t warmup_epochs = 2;
  std::size_t total_epochs = 10;
};

/// Linear warmup base·(step+1)/W over W = warmup_epochs·steps_per_epoch steps,
/// then cosine decay reaching min_lr at the last step (total·steps_per_epoch − 1).
double lr_at(const LRSchedule& sched, std::size_t step, std::size_t steps_per_epoch);

}  // namespace spartan

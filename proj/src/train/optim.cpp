#include "spartan/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace spartan {

template <class T>
AdamW<T>::AdamW(std::vector<Tensor<T>> params, AdamWOptions opts)
    : params_(std::move(params)), opts_(opts) {
  for (const auto& p : params_) {
    if (!p.defined()) throw ContractError("AdamW: undefined parameter");
    m_.emplace_back(p.numel(), T{0});
    v_.emplace_back(p.numel(), T{0});
  }
}

template <class T>
void AdamW<T>::step(double lr) {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const T b1 = static_cast<T>(opts_.beta1), b2 = static_cast<T>(opts_.beta2);
  const T corr1 = static_cast<T>(1.0 - std::pow(opts_.beta1, t));
  const T corr2 = static_cast<T>(1.0 - std::pow(opts_.beta2, t));
  const T lr_t = static_cast<T>(lr), eps = static_cast<T>(opts_.eps);
  const T decay = static_cast<T>(lr * opts_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto data = p.mutable_data();
    const bool has_grad = p.has_grad();
    std::span<const T> grad = has_grad ? p.grad() : std::span<const T>{};
    if (has_grad && grad.size() != data.size()) {
      throw ShapeError("AdamW: gradient of parameter " + std::to_string(i) + " has " +
                       std::to_string(grad.size()) + " values, parameter has " + std::to_string(data.size()));
    }
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      const T g = has_grad ? grad[j] : T{0};
      if (decay != T{0}) data[j] -= decay * data[j];
      m[j] = b1 * m[j] + (T{1} - b1) * g;
      v[j] = b2 * v[j] + (T{1} - b2) * g * g;
      const T mhat = m[j] / corr1;
      const T vhat = v[j] / corr2;
      data[j] -= lr_t * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template <class T>
void AdamW<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template class AdamW<float>;
template class AdamW<double>;

double lr_at(const LRSchedule& sched, std::size_t step, std::size_t steps_per_epoch) {
  const std::size_t warmup = sched.warmup_epochs * steps_per_epoch;
  const std::size_t total = sched.total_epochs * steps_per_epoch;
  if (step < warmup) {
    return sched.base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  }
  if (total <= warmup + 1) return sched.min_lr;
  const double progress =
      std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(total - warmup - 1));
  return sched.min_lr +
         (sched.base_lr - sched.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace spartan

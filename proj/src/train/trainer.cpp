#include "spartan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spartan/loss.hpp"

namespace spartan {

std::size_t steps_per_epoch(std::size_t dataset_size, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  return dataset_size / batch_size + (dataset_size % batch_size >= 2 ? 1 : 0);
}

namespace {

template <class T>
void check_compatible(const Model<T>& model, const Dataset& ds) {
  const auto& cfg = model.config();
  ds.check(cfg.num_classes);
  if (ds.size() > 0 && ds.channels != cfg.in_channels) {
    throw DataError("dataset has " + std::to_string(ds.channels) + " channels, model expects " +
                    std::to_string(cfg.in_channels));
  }
  if (ds.size() > 0 && (ds.height % kModelStride != 0 || ds.width % kModelStride != 0)) {
    throw DataError("dataset images are " + std::to_string(ds.height) + "x" + std::to_string(ds.width) +
                    "; the model needs multiples of " + std::to_string(kModelStride));
  }
}

template <class T>
void check_finite(const Model<T>& model, std::size_t epoch) {
  for (const auto& nt : model.named_tensors()) {
    const auto data = nt.tensor.data();
    const auto bad = std::find_if(data.begin(), data.end(), [](T v) { return !std::isfinite(v); });
    if (bad != data.end()) {
      throw NumericError("non-finite value in '" + nt.name + "' at index " +
                         std::to_string(bad - data.begin()) + " after epoch " + std::to_string(epoch));
    }
  }
}

}  // namespace

template <class T>
EpochMetrics train_epoch(Model<T>& model, const Dataset& ds, AdamW<T>& opt, const LRSchedule& sched,
                         const TrainOptions& opts, std::size_t epoch) {
  check_compatible(model, ds);
  if (ds.size() == 0) throw EmptyInputError("training set is empty");
  const std::size_t steps = steps_per_epoch(ds.size(), opts.batch_size);
  if (steps == 0) throw ContractError("training needs at least 2 samples per batch");

  std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  EpochMetrics metrics;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = s * opts.batch_size;
    const std::size_t end = std::min(ds.size(), begin + opts.batch_size);
    std::span<const std::size_t> idx(order.data() + begin, end - begin);
    std::vector<std::int64_t> labels;
    for (auto i : idx) labels.push_back(ds.labels[i]);

    const auto batch = make_batch<T>(ds, idx, opts.augment, rng);
    const double lr = lr_at(sched, opt.step_count(), steps);
    opt.zero_grad();
    const auto logits = model.forward(batch, true);
    auto loss = cross_entropy(logits, labels);
    loss.backward();
    opt.step(lr);

    loss_sum += static_cast<double>(loss.item()) * static_cast<double>(idx.size());
    correct += count_correct(logits, labels);
    metrics.samples += idx.size();
    metrics.lr = lr;
  }
  opt.zero_grad();
  check_finite(model, epoch);
  metrics.loss = loss_sum / static_cast<double>(metrics.samples);
  metrics.top1 = static_cast<double>(correct) / static_cast<double>(metrics.samples);
  return metrics;
}

template <class T>
EvalMetrics evaluate(Model<T>& model, const Dataset& ds, std::size_t batch_size) {
  check_compatible(model, ds);
  if (ds.size() == 0) throw EmptyInputError("evaluation set is empty");
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  NoGradGuard no_grad;
  std::mt19937_64 unused_rng(0);
  EvalMetrics metrics;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < ds.size(); begin += batch_size) {
    const std::size_t end = std::min(ds.size(), begin + batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    std::vector<std::int64_t> labels;
    for (auto i : idx) labels.push_back(ds.labels[i]);
    const auto logits = model.forward(make_batch<T>(ds, idx, Augment::none, unused_rng), false);
    loss_sum += static_cast<double>(cross_entropy(logits, labels).item()) * static_cast<double>(idx.size());
    correct += count_correct(logits, labels);
  }
  metrics.samples = ds.size();
  metrics.loss = loss_sum / static_cast<double>(ds.size());
  metrics.top1 = static_cast<double>(correct) / static_cast<double>(ds.size());
  return metrics;
}

template EpochMetrics train_epoch(Model<float>&, const Dataset&, AdamW<float>&, const LRSchedule&,
                                  const TrainOptions&, std::size_t);
template EpochMetrics train_epoch(Model<double>&, const Dataset&, AdamW<double>&, const LRSchedule&,
                                  const TrainOptions&, std::size_t);
template EvalMetrics evaluate(Model<float>&, const Dataset&, std::size_t);
template EvalMetrics evaluate(Model<double>&, const Dataset&, std::size_t);

}  // namespace spartan

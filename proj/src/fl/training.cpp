#include "pvfl/fl/training.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pvfl::fl {

namespace {

void check_args(const ClientShard& shard, double lr, std::size_t batch_size) {
  if (shard.data.empty()) throw std::invalid_argument("local training: client " + std::to_string(shard.client_id) + " has an empty shard");
  if (lr < 0.0) throw std::invalid_argument("local training: lr must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("local training: batch_size must be >= 1");
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seeds::derive(seed, "epoch", epoch));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

void sgd_step(const Classifier& model, ParamVector& w, const ParamVector& start, const LabeledDataset& data,
              std::span<const std::size_t> batch, double lr, double mu) {
  const LossAndGrad lg = model.loss_and_grad(w, data, batch);
  if (mu == 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * lg.grad[i];
    return;
  }
  const double denom = 1.0 + lr * mu;
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = (w[i] - lr * lg.grad[i] + lr * mu * start[i]) / denom;
}

}  // namespace

ParamVector local_train(const Classifier& model, const ParamVector& start, const ClientShard& shard,
                        const LocalTrainConfig& config, std::uint64_t seed) {
  check_args(shard, config.lr, config.batch_size);
  if (config.epochs == 0) throw std::invalid_argument("local_train: epochs must be >= 1");
  if (config.prox_mu < 0.0) throw std::invalid_argument("local_train: prox_mu must be non-negative");
  ParamVector w = start;
  const std::size_t n = shard.data.size();
  for (std::size_t e = 0; e < config.epochs; ++e) {
    const auto order = epoch_order(n, seed, e);
    for (std::size_t b = 0; b < n; b += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + b, std::min(config.batch_size, n - b));
      sgd_step(model, w, start, shard.data, batch, config.lr, config.prox_mu);
    }
  }
  return w;
}

ParamVector potential_update(const Classifier& model, const ParamVector& global, const ClientShard& shard, double lr,
                             std::size_t batch_size, std::uint64_t seed) {
  check_args(shard, lr, batch_size);
  const auto order = epoch_order(shard.data.size(), seed, 0);
  const std::span<const std::size_t> batch(order.data(), std::min(batch_size, order.size()));
  ParamVector w = global;
  sgd_step(model, w, global, shard.data, batch, lr, 0.0);
  return w;
}

}  // namespace pvfl::fl

#include "pvfl/env.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "pvfl/fl/aggregation.hpp"
#include "pvfl/fl/metrics.hpp"
#include "pvfl/seeds.hpp"

namespace pvfl {

double reward_update(double prev, double f1, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("reward_update: lambda must be in (0, 1]");
  return lambda * f1 + (1.0 - lambda) * prev;
}

FederatedEnv::FederatedEnv(fl::Classifier model, std::vector<fl::ClientShard> shards, fl::LabeledDataset validation,
                           VisibilityProcess visibility, EnvConfig config, fl::ParamVector initial,
                           std::shared_ptr<const qnet::ProjectionMatrix> projection)
    : model_(std::move(model)),
      shards_(std::move(shards)),
      validation_(std::move(validation)),
      visibility_(std::move(visibility)),
      config_(config),
      projection_(std::move(projection)),
      global_(std::move(initial)),
      shard_reads_(shards_.size(), 0) {
  if (shards_.size() != visibility_.num_clients()) throw std::invalid_argument("env: shard count differs from client count");
  for (std::size_t i = 0; i < shards_.size(); ++i) {
    if (shards_[i].client_id != static_cast<int>(i)) throw std::invalid_argument("env: shards must be ordered by client ID");
    if (shards_[i].data.empty()) throw std::invalid_argument("env: client " + std::to_string(i) + " has no data");
  }
  if (validation_.empty()) throw std::invalid_argument("env: empty validation set");
  if (global_.size() != model_.num_params()) throw std::invalid_argument("env: initial parameters do not match the model");
  if (config_.selection_size == 0) throw std::invalid_argument("env: selection size must be >= 1");
  if (config_.aggregation_window == 0) throw std::invalid_argument("env: aggregation window must be >= 1");
  if (!(config_.lambda > 0.0 && config_.lambda <= 1.0)) throw std::invalid_argument("env: lambda must be in (0, 1]");
  if (projection_ && projection_->d_model() != model_.num_params()) {
    throw std::invalid_argument("env: projection width does not match the model");
  }
}

std::uint64_t FederatedEnv::potential_seed(std::uint64_t t, int client) const {
  return seeds::derive(seeds::derive(config_.seed, "potential", t), "client", static_cast<std::uint64_t>(client));
}

std::uint64_t FederatedEnv::local_seed(std::uint64_t t, int client) const {
  return seeds::derive(seeds::derive(config_.seed, "local", t), "client", static_cast<std::uint64_t>(client));
}

double FederatedEnv::evaluate_f1(const fl::ParamVector& params) const {
  const auto pred = model_.predict(params, validation_);
  return fl::macro_f1(pred, validation_.labels(), validation_.num_classes());
}

Observation FederatedEnv::reset() {
  round_ = 0;
  history_.clear();
  f1_ = evaluate_f1(global_);
  reward_ = f1_;
  current_ = observe(visibility_.next_cluster(round_));
  return current_;
}

Observation FederatedEnv::observe(const std::vector<int>& cluster) {
  Observation obs;
  obs.round = round_;
  obs.ids = cluster;
  std::sort(obs.ids.begin(), obs.ids.end());
  for (std::size_t i = 0; i < obs.ids.size(); ++i) {
    const int id = obs.ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= shards_.size()) throw std::invalid_argument("observe: unknown client " + std::to_string(id));
    if (i > 0 && obs.ids[i - 1] == id) throw std::invalid_argument("observe: duplicate client " + std::to_string(id));
  }
  obs.updates.reserve(obs.ids.size());
  for (int id : obs.ids) {
    ++shard_reads_[static_cast<std::size_t>(id)];
    obs.updates.push_back(fl::potential_update(model_, global_, shards_[static_cast<std::size_t>(id)], config_.local.lr,
                                               config_.local.batch_size, potential_seed(round_, id)));
  }
  if (projection_) {
    obs.global_features = qnet::random_project(global_, *projection_);
    for (const auto& u : obs.updates) obs.features.push_back(qnet::random_project(u, *projection_));
  }
  return obs;
}

StepOutcome FederatedEnv::step(const std::vector<int>& action) {
  std::vector<int> chosen = action;
  std::sort(chosen.begin(), chosen.end());
  if (std::adjacent_find(chosen.begin(), chosen.end()) != chosen.end()) throw std::invalid_argument("step: duplicate client in action");
  for (int id : chosen) {
    if (!std::binary_search(current_.ids.begin(), current_.ids.end(), id)) {
      throw std::invalid_argument("step: client " + std::to_string(id) + " is not in the visible cluster");
    }
  }
  const std::size_t expected = selection_size(current_.ids.size());
  if (chosen.size() != expected) {
    throw std::invalid_argument("step: action selects " + std::to_string(chosen.size()) + " clients, expected " +
                                std::to_string(expected));
  }

  StepOutcome out;
  history_.push_front(global_);
  while (history_.size() > config_.aggregation_window) history_.pop_back();
  fl::ParamVector next = global_;
  if (!chosen.empty()) {
    std::vector<fl::ParamVector> updates;
    std::vector<std::size_t> sizes;
    for (int id : chosen) {
      const auto& shard = shards_[static_cast<std::size_t>(id)];
      ++shard_reads_[static_cast<std::size_t>(id)];
      updates.push_back(fl::local_train(model_, global_, shard, config_.local, local_seed(round_, id)));
      sizes.push_back(shard.data.size());
    }
    const fl::ParamVector fresh = fl::aggregate_weighted(updates, sizes);
    const std::vector<fl::ParamVector> hist(history_.begin(), history_.end());
    next = fl::aggregate_temporal(fresh, hist, config_.aggregation_window);
    f1_ = evaluate_f1(next);
  }
  reward_ = reward_update(reward_, f1_, config_.lambda);

  out.record.round = round_;
  out.record.cluster = current_.ids;
  out.record.features = current_.features;
  out.record.global_features = current_.global_features;
  out.record.action = chosen;
  out.record.reward = reward_;
  out.reward = reward_;
  out.validation_f1 = f1_;

  global_ = std::move(next);
  ++round_;
  current_ = observe(visibility_.next_cluster(round_));
  out.next = current_;
  return out;
}

}  // namespace pvfl

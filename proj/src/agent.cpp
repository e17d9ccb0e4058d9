#include "pvfl/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pvfl::agent {

std::string policy_key(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::STDQN: return "stdqn";
    case PolicyKind::Random: return "random";
    case PolicyKind::GradNorm: return "gradnorm";
    case PolicyKind::FedProxRandom: return "fedprox_random";
    case PolicyKind::TemporalAvgRandom: return "temporal_avg_random";
  }
  return "unknown";
}

std::string policy_label(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::STDQN: return "STDQN";
    case PolicyKind::Random: return "Random";
    case PolicyKind::GradNorm: return "GradNorm (HA-EdgeFlow-inspired)";
    case PolicyKind::FedProxRandom: return "FedProx-Random";
    case PolicyKind::TemporalAvgRandom: return "TemporalAvg-Random (FedAWAC-inspired)";
  }
  return "unknown";
}

PolicyKind parse_policy(const std::string& key) {
  for (PolicyKind k : {PolicyKind::STDQN, PolicyKind::Random, PolicyKind::GradNorm, PolicyKind::FedProxRandom,
                       PolicyKind::TemporalAvgRandom}) {
    if (policy_key(k) == key) return k;
  }
  throw std::invalid_argument("unknown policy '" + key +
                              "' (expected stdqn, random, gradnorm, fedprox_random or temporal_avg_random)");
}

void validate(const AgentConfig& c) {
  if (c.K < 1) throw std::invalid_argument("agent: K must be >= 1");
  if (c.H < 1) throw std::invalid_argument("agent: H must be >= 1");
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw std::invalid_argument("agent: gamma must be in (0, 1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw std::invalid_argument("agent: tau must be in (0, 1]");
  if (c.eps_start < 0.0 || c.eps_start > 1.0 || c.eps_end < 0.0 || c.eps_end > 1.0) {
    throw std::invalid_argument("agent: epsilon values must be in [0, 1]");
  }
  if (c.eps_decay_fraction < 0.0 || c.eps_decay_fraction > 1.0) throw std::invalid_argument("agent: eps_decay_fraction must be in [0, 1]");
  if (c.batch_size < 1) throw std::invalid_argument("agent: batch_size must be >= 1");
  if (c.buffer_capacity < c.H + 1) throw std::invalid_argument("agent: buffer must hold at least H + 1 rounds");
  if (!(c.optimizer.lr > 0.0)) throw std::invalid_argument("agent: optimizer lr must be positive");
}

double epsilon_at(const AgentConfig& c, std::uint64_t round, std::uint64_t total_rounds) {
  // The tolerance keeps ceil(0.3 * 100) at 30 despite rounding.
  const double decay = std::ceil(c.eps_decay_fraction * static_cast<double>(total_rounds) - 1e-9);
  if (decay <= 0.0 || static_cast<double>(round) >= decay) return c.eps_end;
  return c.eps_start + (c.eps_end - c.eps_start) * (static_cast<double>(round) / decay);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer: capacity must be >= 1");
}

void ReplayBuffer::push(RoundRecord record) {
  if (!records_.empty()) {
    if (records_.back().terminal) throw std::logic_error("replay buffer: push after a terminal record");
    if (record.round != records_.back().round + 1) {
      throw std::invalid_argument("replay buffer: round " + std::to_string(record.round) + " does not follow " +
                                  std::to_string(records_.back().round));
    }
  }
  if (!origin_) origin_ = record.round;
  records_.push_back(std::move(record));
  while (records_.size() > capacity_) records_.pop_front();
}

const RoundRecord* ReplayBuffer::find(std::uint64_t round) const {
  if (records_.empty() || round < records_.front().round || round > records_.back().round) return nullptr;
  return &records_[static_cast<std::size_t>(round - records_.front().round)];
}

std::vector<std::uint64_t> ReplayBuffer::valid_starts(std::size_t H) const {
  std::vector<std::uint64_t> out;
  if (records_.empty()) return out;
  const std::uint64_t front = records_.front().round;
  for (const RoundRecord& r : records_) {
    const std::uint64_t t = r.round;
    if (r.action.empty()) continue;
    const std::uint64_t hist_start = t >= *origin_ + H ? t - H : *origin_;
    if (hist_start < front) continue;
    bool ok = false;
    for (std::size_t j = 0; j <= H; ++j) {
      const RoundRecord* u = find(t + j);
      if (!u) break;
      if (j == H) {
        ok = !u->cluster.empty();
        break;
      }
      if (u->terminal) {
        ok = true;
        break;
      }
    }
    if (ok) out.push_back(t);
  }
  return out;
}

std::vector<const RoundRecord*> ReplayBuffer::window(std::uint64_t start, std::size_t H) const {
  std::vector<const RoundRecord*> out;
  for (std::size_t j = 0; j <= H; ++j) {
    const RoundRecord* r = find(start + j);
    if (!r) throw std::out_of_range("replay buffer: round " + std::to_string(start + j) + " is not buffered");
    out.push_back(r);
    if (r->terminal && j < H) break;
  }
  return out;
}

qnet::QInput ReplayBuffer::input_at(std::uint64_t round, std::size_t H) const {
  if (!origin_) throw std::out_of_range("replay buffer: empty");
  const std::uint64_t hist_start = round >= *origin_ + H ? round - H : *origin_;
  qnet::QInput in;
  for (std::uint64_t u = hist_start; u <= round; ++u) {
    const RoundRecord* r = find(u);
    if (!r) throw std::out_of_range("replay buffer: history round " + std::to_string(u) + " is not buffered");
    in.history.push_back(r->global_features);
  }
  const RoundRecord* cur = find(round);
  in.cluster = cur->features;
  in.ids = cur->cluster;
  return in;
}

std::vector<int> uniform_subset(std::span<const int> ids, std::size_t k, Rng& rng) {
  std::vector<int> pool(ids.begin(), ids.end());
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<int> top_k(std::span<const double> scores, std::span<const int> ids, std::size_t k) {
  if (scores.size() != ids.size()) throw std::invalid_argument("top_k: scores and IDs differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  k = std::min(k, ids.size());
  std::vector<int> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(ids[order[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> select_action(std::span<const double> q, std::span<const int> ids, std::size_t K, double epsilon,
                               Rng& rng) {
  if (ids.empty()) throw std::invalid_argument("select: empty cluster; the round must be skipped");
  const std::size_t k = std::min(K, ids.size());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) return uniform_subset(ids, k, rng);
  return top_k(q, ids, k);
}

double multistep_target(std::span<const double> rewards, double gamma, std::optional<double> bootstrap) {
  double y = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    y += discount * r;
    discount *= gamma;
  }
  if (bootstrap) y += discount * *bootstrap;
  return y;
}

double double_dqn_value(const qnet::QNetState& online, const qnet::QNetState& target, const qnet::QInput& input,
                        std::size_t K) {
  const auto q_online = qnet::q_values(online, input);
  const auto best = top_k(q_online, input.ids, K);
  const auto q_target = qnet::q_values(target, input);
  double s = 0.0;
  for (int id : best) {
    const auto it = std::find(input.ids.begin(), input.ids.end(), id);
    s += q_target[static_cast<std::size_t>(it - input.ids.begin())];
  }
  return s / static_cast<double>(best.size());
}

double multistep_target(std::span<const RoundRecord* const> window, std::size_t H, double gamma,
                        const qnet::QNetState& online, const qnet::QNetState& target, std::size_t K) {
  if (window.empty()) throw std::invalid_argument("multistep_target: empty window");
  for (std::size_t j = 1; j < window.size(); ++j) {
    if (window[j]->round != window[j - 1]->round + 1) throw std::invalid_argument("multistep_target: window is not contiguous");
  }
  const bool full = window.size() == H + 1;
  if (!full && !window.back()->terminal) throw std::invalid_argument("multistep_target: short window without a terminal record");
  const std::size_t n_rewards = full ? H : window.size();
  std::vector<double> rewards;
  for (std::size_t j = 0; j < n_rewards; ++j) rewards.push_back(window[j]->reward);
  if (!full) return multistep_target(rewards, gamma, std::nullopt);

  qnet::QInput boot;
  for (std::size_t j = 1; j <= H; ++j) boot.history.push_back(window[j]->global_features);
  boot.cluster = window.back()->features;
  boot.ids = window.back()->cluster;
  return multistep_target(rewards, gamma, double_dqn_value(online, target, boot, K));
}

num::Var action_value(const qnet::QForward& forward, std::span<const int> ids, std::span<const int> action) {
  if (action.empty()) throw std::invalid_argument("action_value: empty action");
  std::vector<std::size_t> rows;
  for (int a : action) {
    const auto it = std::find(ids.begin(), ids.end(), a);
    if (it == ids.end()) throw std::invalid_argument("action_value: client " + std::to_string(a) + " not in the cluster");
    rows.push_back(static_cast<std::size_t>(it - ids.begin()));
  }
  return num::mean_rows(num::gather_rows(forward.q, rows));
}

TrainOutcome train_step(const ReplayBuffer& buffer, const AgentConfig& config, std::size_t min_windows,
                        qnet::QNetState& online, const qnet::QNetState& target, num::AdamState& optimizer, Rng& rng) {
  const auto starts = buffer.valid_starts(config.H);
  if (starts.empty() || starts.size() < min_windows) return {};

  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  std::vector<std::uint64_t> batch(config.batch_size);
  for (auto& b : batch) b = starts[pick(rng)];

  std::vector<double> targets;
  targets.reserve(batch.size());
  for (std::uint64_t t : batch) {
    const auto w = buffer.window(t, config.H);
    targets.push_back(multistep_target(w, config.H, config.gamma, online, target, config.K));
  }

  num::Graph g;
  const qnet::BoundQNet net = qnet::bind(g, online, true);
  num::Var predicted;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const qnet::QInput in = buffer.input_at(batch[i], config.H);
    const qnet::QForward f = qnet::q_forward(g, net, in);
    const num::Var q = action_value(f, in.ids, buffer.find(batch[i])->action);
    predicted = i == 0 ? q : num::concat_cols(predicted, q);
  }
  const num::Var y = g.constant(num::Tensor::row(targets));
  const num::Var loss = num::mse(predicted, y);
  g.backward(loss);

  std::vector<num::Tensor> grads;
  grads.reserve(net.leaves.size());
  for (const num::Var& leaf : net.leaves) grads.push_back(*g.grad(leaf));
  std::vector<num::Tensor*> params = online.parameters();
  std::vector<num::Tensor> values;
  values.reserve(params.size());
  for (num::Tensor* p : params) values.push_back(std::move(*p));
  num::adam_step(values, grads, optimizer);
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = std::move(values[i]);
  return {true, loss.value().item()};
}

std::vector<int> baseline_select(PolicyKind kind, const Observation& obs, const fl::ParamVector& global, std::size_t K,
                                 Rng& rng) {
  if (obs.ids.empty()) throw std::invalid_argument("baseline_select: empty cluster; the round must be skipped");
  switch (kind) {
    case PolicyKind::Random:
    case PolicyKind::FedProxRandom:
    case PolicyKind::TemporalAvgRandom:
      return uniform_subset(obs.ids, K, rng);
    case PolicyKind::GradNorm: {
      std::vector<double> norms;
      for (const auto& u : obs.updates) norms.push_back(fl::l2_distance(u, global));
      return top_k(norms, obs.ids, K);
    }
    case PolicyKind::STDQN:
      break;
  }
  throw std::invalid_argument("baseline_select: STDQN is not a baseline policy");
}

DqnAgent::DqnAgent(AgentConfig config, qnet::QNetConfig net, std::uint64_t seed)
    : config_(config),
      online_(net, seeds::derive(seed, "qnet_init")),
      target_(online_),
      buffer_(config.buffer_capacity),
      select_rng_(seeds::derive(seed, "agent")),
      replay_rng_(seeds::derive(seed, "replay")) {
  validate(config_);
  if (net.max_history != config_.H + 1) throw std::invalid_argument("agent: Q-network max_history must equal H + 1");
  std::vector<num::Tensor> params;
  for (const num::Tensor* p : online_.parameters()) params.push_back(*p);
  optimizer_ = num::AdamState(config_.optimizer, params);
}

qnet::QInput DqnAgent::current_input(const Observation& obs) const {
  qnet::QInput in;
  in.history.assign(recent_globals_.begin(), recent_globals_.end());
  in.cluster = obs.features;
  in.ids = obs.ids;
  return in;
}

std::vector<int> DqnAgent::act(const Observation& obs, double epsilon) {
  if (obs.global_features.empty()) throw std::invalid_argument("agent: observation carries no projected features");
  recent_globals_.push_back(obs.global_features);
  while (recent_globals_.size() > config_.H + 1) recent_globals_.pop_front();
  if (obs.empty()) return {};
  const qnet::QInput in = current_input(obs);
  const auto q = qnet::q_values(online_, in);
  return select_action(q, in.ids, config_.K, epsilon, select_rng_);
}

std::optional<double> DqnAgent::learn(RoundRecord record) {
  buffer_.push(std::move(record));
  const TrainOutcome out =
      train_step(buffer_, config_, std::max<std::size_t>(config_.train_start_windows, 1), online_, target_, optimizer_, replay_rng_);
  if (!out.trained) return std::nullopt;
  qnet::soft_update(online_, target_, config_.tau);
  return out.loss;
}

}  // namespace pvfl::agent

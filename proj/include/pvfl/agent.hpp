#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvfl/env.hpp"
#include "pvfl/numerics/adam.hpp"
#include "pvfl/qnet.hpp"
#include "pvfl/seeds.hpp"

namespace pvfl::agent {

enum class PolicyKind { STDQN, Random, GradNorm, FedProxRandom, TemporalAvgRandom };

/// Config key: "stdqn", "random", "gradnorm", "fedprox_random", "temporal_avg_random".
std::string policy_key(PolicyKind kind);
/// Name written to logs and summaries. The two simplified baselines carry an "-inspired" tag.
std::string policy_label(PolicyKind kind);
PolicyKind parse_policy(const std::string& key);

struct AgentConfig {
  std::size_t K = 5;
  std::size_t H = 5;
  double gamma = 0.9;
  double tau = 0.005;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.3;
  std::size_t batch_size = 32;
  std::size_t train_start_windows = 320;
  std::size_t buffer_capacity = 600;
  num::AdamConfig optimizer;
};

void validate(const AgentConfig& config);

/// Linear decay from eps_start to eps_end over the first eps_decay_fraction of the run.
double epsilon_at(const AgentConfig& config, std::uint64_t round, std::uint64_t total_rounds);

/// Bounded FIFO of consecutive RoundRecords.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Records must arrive in consecutive round order.
  void push(RoundRecord record);

  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  const RoundRecord* find(std::uint64_t round) const;
  const std::deque<RoundRecord>& records() const { return records_; }

  /// Rounds t that can start a training window: record t has a non-empty
  /// action, its history back to max(first round, t - H) is still buffered,
  /// and either rounds t..t+H are buffered with a non-empty cluster at t+H,
  /// or a terminal record is reached before t+H.
  std::vector<std::uint64_t> valid_starts(std::size_t H) const;

  /// Records t..t+H, cut short at a terminal record.
  std::vector<const RoundRecord*> window(std::uint64_t start, std::size_t H) const;

  /// Q-network input at round t: global features of max(first round, t - H)..t
  /// and the cluster features of round t.
  qnet::QInput input_at(std::uint64_t round, std::size_t H) const;

 private:
  std::size_t capacity_;
  std::optional<std::uint64_t> origin_;
  std::deque<RoundRecord> records_;
};

/// Uniformly random k-subset of `ids`, sorted ascending.
std::vector<int> uniform_subset(std::span<const int> ids, std::size_t k, Rng& rng);

/// The k IDs with the highest scores, ties broken by the lower ID, sorted ascending.
std::vector<int> top_k(std::span<const double> scores, std::span<const int> ids, std::size_t k);

/// Epsilon-greedy top-K' selection with K' = min(|ids|, K).
std::vector<int> select_action(std::span<const double> q, std::span<const int> ids, std::size_t K, double epsilon,
                               Rng& rng);

/// sum_k gamma^k r_k + gamma^len * bootstrap, with len = rewards.size().
double multistep_target(std::span<const double> rewards, double gamma, std::optional<double> bootstrap);

/// Double-DQN bootstrap: top-K' clients by the online network, valued by the
/// target network as the mean of their per-client Q values.
double double_dqn_value(const qnet::QNetState& online, const qnet::QNetState& target, const qnet::QInput& input,
                        std::size_t K);

/// Target for a window t..t+H. Non-terminal windows bootstrap from round t+H
/// using the H global features of rounds t+1..t+H as temporal context.
double multistep_target(std::span<const RoundRecord* const> window, std::size_t H, double gamma,
                        const qnet::QNetState& online, const qnet::QNetState& target, std::size_t K);

/// Mean of the per-client Q values of `action` (which must be part of the input's cluster).
num::Var action_value(const qnet::QForward& forward, std::span<const int> ids, std::span<const int> action);

struct TrainOutcome {
  bool trained = false;
  double loss = 0.0;
};

/// One optimiser step on the mean squared TD error of `batch_size` uniformly
/// sampled windows. Returns trained == false if fewer than `min_windows`
/// windows are available.
TrainOutcome train_step(const ReplayBuffer& buffer, const AgentConfig& config, std::size_t min_windows,
                        qnet::QNetState& online, const qnet::QNetState& target, num::AdamState& optimizer, Rng& rng);

/// Selection for the non-learning policies. GradNorm ranks visible clients by
/// ||W_j - W_glob||_2 of their potential updates.
std::vector<int> baseline_select(PolicyKind kind, const Observation& observation, const fl::ParamVector& global,
                                 std::size_t K, Rng& rng);

/// Spatio-temporal attention Double-DQN client selector.
class DqnAgent {
 public:
  DqnAgent(AgentConfig config, qnet::QNetConfig net, std::uint64_t seed);

  /// Records the round's global features as temporal context and returns the
  /// selected clients (empty for an empty cluster).
  std::vector<int> act(const Observation& observation, double epsilon);

  /// Stores the outcome and runs one training step when enough windows exist.
  std::optional<double> learn(RoundRecord record);

  const AgentConfig& config() const { return config_; }
  const qnet::QNetState& online() const { return online_; }
  const qnet::QNetState& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  qnet::QInput current_input(const Observation& observation) const;

 private:
  AgentConfig config_;
  qnet::QNetState online_;
  qnet::QNetState target_;
  num::AdamState optimizer_;
  ReplayBuffer buffer_;
  Rng select_rng_;
  Rng replay_rng_;
  std::deque<std::vector<double>> recent_globals_;
};

}  // namespace pvfl::agent

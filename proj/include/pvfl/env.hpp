#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <span>
#include <vector>

#include "pvfl/fl/classifier.hpp"
#include "pvfl/fl/dataset.hpp"
#include "pvfl/fl/training.hpp"
#include "pvfl/qnet.hpp"
#include "pvfl/visibility.hpp"

namespace pvfl {

/// What the server sees in one round: potential one-step updates of the
/// visible clients only. `features` / `global_features` are filled with the
/// random-projection compressions when the environment has a projection.
struct Observation {
  std::uint64_t round = 0;
  std::vector<int> ids;
  std::vector<fl::ParamVector> updates;
  std::vector<std::vector<double>> features;
  std::vector<double> global_features;

  bool empty() const { return ids.empty(); }
};

/// One replay entry, stored in compressed form.
struct RoundRecord {
  std::uint64_t round = 0;
  std::vector<int> cluster;
  std::vector<std::vector<double>> features;  // aligned with cluster
  std::vector<double> global_features;        // compression of the global model at the start of the round
  std::vector<int> action;
  double reward = 0.0;
  bool terminal = false;
};

struct EnvConfig {
  std::size_t selection_size = 5;      // K
  std::size_t aggregation_window = 1;  // temporal aggregation window; 1 = plain weighted aggregation
  double lambda = 0.5;
  fl::LocalTrainConfig local;
  std::uint64_t seed = 0;
};

struct StepOutcome {
  double reward = 0.0;
  double validation_f1 = 0.0;
  RoundRecord record;
  Observation next;
};

/// r^t = lambda * f1 + (1 - lambda) * r^{t-1}.
double reward_update(double prev, double f1, double lambda);

/// Communication-round state machine: observation, selection, local
/// training, aggregation and reward.
class FederatedEnv {
 public:
  FederatedEnv(fl::Classifier model, std::vector<fl::ClientShard> shards, fl::LabeledDataset validation,
               VisibilityProcess visibility, EnvConfig config, fl::ParamVector initial,
               std::shared_ptr<const qnet::ProjectionMatrix> projection = nullptr);

  /// Evaluates the initial model (r^{-1} = its validation macro-F1) and
  /// returns the observation of round 0.
  Observation reset();

  /// Potential updates of `cluster` from the current global model. Shards of
  /// clients outside the cluster are never read.
  Observation observe(const std::vector<int>& cluster);

  /// Applies the action to the current observation and advances one round.
  StepOutcome step(const std::vector<int>& action);

  std::size_t selection_size(std::size_t cluster_size) const { return std::min(cluster_size, config_.selection_size); }

  const fl::Classifier& model() const { return model_; }
  const fl::ParamVector& global() const { return global_; }
  /// Previous global models, newest first.
  const std::deque<fl::ParamVector>& history() const { return history_; }
  double reward_memory() const { return reward_; }
  double validation_f1() const { return f1_; }
  std::uint64_t round() const { return round_; }
  const Observation& current() const { return current_; }
  const std::vector<fl::ClientShard>& shards() const { return shards_; }
  const EnvConfig& config() const { return config_; }
  /// Number of times each client's shard has been read.
  const std::vector<std::size_t>& shard_reads() const { return shard_reads_; }

  /// Seeds of the per-client computations in round t.
  std::uint64_t potential_seed(std::uint64_t t, int client) const;
  std::uint64_t local_seed(std::uint64_t t, int client) const;

 private:
  double evaluate_f1(const fl::ParamVector& params) const;

  fl::Classifier model_;
  std::vector<fl::ClientShard> shards_;
  fl::LabeledDataset validation_;
  VisibilityProcess visibility_;
  EnvConfig config_;
  std::shared_ptr<const qnet::ProjectionMatrix> projection_;

  fl::ParamVector global_;
  std::deque<fl::ParamVector> history_;
  double reward_ = 0.0;
  double f1_ = 0.0;
  std::uint64_t round_ = 0;
  Observation current_;
  std::vector<std::size_t> shard_reads_;
};

}  // namespace pvfl

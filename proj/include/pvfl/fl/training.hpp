#pragma once

#include <cstddef>
#include <cstdint>

#include "pvfl/fl/classifier.hpp"
#include "pvfl/fl/dataset.hpp"

namespace pvfl::fl {

struct LocalTrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 3;
  double prox_mu = 0.0;
};

/// Seeded mini-batch SGD on cross-entropy plus (prox_mu / 2) * ||W - start||^2.
/// The proximal part of each step is taken in closed form,
///   W <- (W - lr * g + lr * mu * start) / (1 + lr * mu),
/// an implicit (backward) step on the proximal part that stays stable for any mu.
/// Epoch e visits the shard in the order of a permutation drawn from derive(seed, "epoch", e).
ParamVector local_train(const Classifier& model, const ParamVector& start, const ClientShard& shard,
                        const LocalTrainConfig& config, std::uint64_t seed);

/// One SGD step on the first mini-batch local_train would visit with the same seed.
ParamVector potential_update(const Classifier& model, const ParamVector& global, const ClientShard& shard, double lr,
                             std::size_t batch_size, std::uint64_t seed);

}  // namespace pvfl::fl

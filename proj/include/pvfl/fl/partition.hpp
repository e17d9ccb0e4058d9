#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pvfl::fl {

using IndexSets = std::vector<std::vector<std::size_t>>;

/// Per class, draws Dirichlet(alpha) client proportions and splits that
/// class's samples accordingly. Empty shards are repaired by moving one
/// sample at a time out of the currently largest shard.
IndexSets partition_dirichlet(std::span<const int> labels, std::size_t num_clients, double alpha, std::uint64_t seed);

/// Each client gets exactly `classes_per_client` classes, assigned round-robin
/// over a seeded class permutation; every class's samples are split evenly
/// among the clients that hold it.
IndexSets partition_label_skew(std::span<const int> labels, std::size_t num_clients, std::size_t classes_per_client,
                               std::uint64_t seed);

/// Uniform shuffle then near-equal contiguous split.
IndexSets partition_iid(std::size_t num_samples, std::size_t num_clients, std::uint64_t seed);

}  // namespace pvfl::fl

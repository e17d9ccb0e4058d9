#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pvfl {

enum class VisibilityKind { MobileServer, RandomAvailability };

/// Per-round visible cluster C^t.
///
/// Mobile server: clients are split once, by a seeded permutation, into
/// clusters of `cluster_size` (the last one may be smaller); each round one
/// cluster is drawn uniformly, independently of earlier rounds.
/// Random availability: each client is visible with probability p, independently.
/// Both are pure functions of (seed, round).
class VisibilityProcess {
 public:
  static VisibilityProcess mobile_server(std::size_t num_clients, std::size_t cluster_size, std::uint64_t seed);
  static VisibilityProcess random_availability(std::size_t num_clients, double p, std::uint64_t seed);

  /// Sorted client IDs visible in round t. May be empty under random availability.
  std::vector<int> next_cluster(std::uint64_t t) const;

  VisibilityKind kind() const { return kind_; }
  std::size_t num_clients() const { return num_clients_; }
  double probability() const { return p_; }
  /// Fixed mobile-server partition (empty for random availability).
  const std::vector<std::vector<int>>& clusters() const { return clusters_; }

 private:
  VisibilityProcess() = default;

  VisibilityKind kind_ = VisibilityKind::MobileServer;
  std::size_t num_clients_ = 0;
  double p_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<std::vector<int>> clusters_;
};

}  // namespace pvfl

#include "pvfl/visibility.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pvfl/seeds.hpp"

namespace pvfl {

VisibilityProcess VisibilityProcess::mobile_server(std::size_t num_clients, std::size_t cluster_size,
                                                   std::uint64_t seed) {
  if (num_clients == 0) throw std::invalid_argument("visibility: need at least one client");
  if (cluster_size == 0) throw std::invalid_argument("visibility: cluster size must be >= 1");
  VisibilityProcess v;
  v.kind_ = VisibilityKind::MobileServer;
  v.num_clients_ = num_clients;
  v.seed_ = seed;
  std::vector<int> perm(num_clients);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seeds::derive(seed, "partition"));
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t b = 0; b < num_clients; b += cluster_size) {
    std::vector<int> c(perm.begin() + static_cast<std::ptrdiff_t>(b),
                       perm.begin() + static_cast<std::ptrdiff_t>(std::min(num_clients, b + cluster_size)));
    std::sort(c.begin(), c.end());
    v.clusters_.push_back(std::move(c));
  }
  return v;
}

VisibilityProcess VisibilityProcess::random_availability(std::size_t num_clients, double p, std::uint64_t seed) {
  if (num_clients == 0) throw std::invalid_argument("visibility: need at least one client");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("visibility: availability probability must be in (0, 1]");
  VisibilityProcess v;
  v.kind_ = VisibilityKind::RandomAvailability;
  v.num_clients_ = num_clients;
  v.p_ = p;
  v.seed_ = seed;
  return v;
}

std::vector<int> VisibilityProcess::next_cluster(std::uint64_t t) const {
  Rng rng(seeds::derive(seed_, "round", t));
  if (kind_ == VisibilityKind::MobileServer) {
    std::uniform_int_distribution<std::size_t> pick(0, clusters_.size() - 1);
    return clusters_[pick(rng)];
  }
  std::vector<int> out;
  std::bernoulli_distribution visible(p_);
  for (std::size_t i = 0; i < num_clients_; ++i) {
    if (visible(rng)) out.push_back(static_cast<int>(i));
  }
  return out;
}

}  // namespace pvfl

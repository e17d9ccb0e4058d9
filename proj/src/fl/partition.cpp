#include "pvfl/fl/partition.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "pvfl/seeds.hpp"

namespace pvfl::fl {

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(std::span<const int> labels) {
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("partition: negative label");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  return by_class;
}

void sort_shards(IndexSets& shards) {
  for (auto& s : shards) std::sort(s.begin(), s.end());
}

}  // namespace

IndexSets partition_dirichlet(std::span<const int> labels, std::size_t num_clients, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw std::invalid_argument("partition_dirichlet: alpha must be positive");
  if (num_clients == 0) throw std::invalid_argument("partition_dirichlet: need at least one client");
  if (labels.size() < num_clients) {
    throw std::invalid_argument("partition_dirichlet: " + std::to_string(labels.size()) + " samples for " +
                                std::to_string(num_clients) + " clients");
  }
  Rng rng(seed);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  IndexSets shards(num_clients);
  for (auto idx : indices_by_class(labels)) {
    if (idx.empty()) continue;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<double> p(num_clients);
    double total = 0.0;
    for (double& x : p) {
      x = gamma(rng);
      total += x;
    }
    if (!(total > 0.0)) {
      // Every gamma draw underflowed (tiny alpha): put the class on one client.
      std::fill(p.begin(), p.end(), 0.0);
      p[std::uniform_int_distribution<std::size_t>(0, num_clients - 1)(rng)] = 1.0;
      total = 1.0;
    }
    const double n = static_cast<double>(idx.size());
    double cum = 0.0;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < num_clients; ++c) {
      cum += p[c] / total;
      std::size_t end = c + 1 == num_clients ? idx.size() : std::min(idx.size(), static_cast<std::size_t>(cum * n));
      end = std::max(end, begin);
      shards[c].insert(shards[c].end(), idx.begin() + static_cast<std::ptrdiff_t>(begin),
                       idx.begin() + static_cast<std::ptrdiff_t>(end));
      begin = end;
    }
  }
  // Repair empty shards from the largest one.
  for (;;) {
    auto empty = std::find_if(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); });
    if (empty == shards.end()) break;
    auto largest = std::max_element(shards.begin(), shards.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    empty->push_back(largest->back());
    largest->pop_back();
  }
  sort_shards(shards);
  return shards;
}

IndexSets partition_label_skew(std::span<const int> labels, std::size_t num_clients, std::size_t classes_per_client,
                               std::uint64_t seed) {
  if (num_clients == 0) throw std::invalid_argument("partition_label_skew: need at least one client");
  auto by_class = indices_by_class(labels);
  const std::size_t num_classes = by_class.size();
  if (classes_per_client == 0 || classes_per_client > num_classes) {
    throw std::invalid_argument("partition_label_skew: classes_per_client = " + std::to_string(classes_per_client) +
                                " must be in [1, " + std::to_string(num_classes) + "]");
  }
  if (num_clients * classes_per_client < num_classes) {
    throw std::invalid_argument("partition_label_skew: " + std::to_string(num_clients) + " clients x " +
                                std::to_string(classes_per_client) + " classes cannot cover " +
                                std::to_string(num_classes) + " classes");
  }
  Rng rng(seed);
  std::vector<std::size_t> perm(num_classes);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  std::vector<std::vector<std::size_t>> holders(num_classes);
  for (std::size_t n = 0; n < num_clients; ++n) {
    for (std::size_t j = 0; j < classes_per_client; ++j) {
      holders[perm[(n * classes_per_client + j) % num_classes]].push_back(n);
    }
  }
  IndexSets shards(num_clients);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < holders[c].size()) {
      throw std::invalid_argument("partition_label_skew: class " + std::to_string(c) + " has " +
                                  std::to_string(idx.size()) + " samples for " + std::to_string(holders[c].size()) +
                                  " holders");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t h = holders[c].size();
    for (std::size_t k = 0; k < h; ++k) {
      const std::size_t begin = k * idx.size() / h;
      const std::size_t end = (k + 1) * idx.size() / h;
      auto& dst = shards[holders[c][k]];
      dst.insert(dst.end(), idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  sort_shards(shards);
  return shards;
}

IndexSets partition_iid(std::size_t num_samples, std::size_t num_clients, std::uint64_t seed) {
  if (num_clients == 0 || num_samples < num_clients) {
    throw std::invalid_argument("partition_iid: need at least one sample per client");
  }
  std::vector<std::size_t> idx(num_samples);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  IndexSets shards(num_clients);
  for (std::size_t k = 0; k < num_clients; ++k) {
    const std::size_t begin = k * num_samples / num_clients;
    const std::size_t end = (k + 1) * num_samples / num_clients;
    shards[k].assign(idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  sort_shards(shards);
  return shards;
}

}  // namespace pvfl::fl

#include "pvfl/fl/aggregation.hpp"

#include <stdexcept>
#include <string>

namespace pvfl::fl {

ParamVector aggregate_weighted(std::span<const ParamVector> updates, std::span<const std::size_t> sizes) {
  if (updates.empty()) throw std::invalid_argument("aggregate_weighted: no updates");
  if (updates.size() != sizes.size()) throw std::invalid_argument("aggregate_weighted: updates and sizes differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw std::invalid_argument("aggregate_weighted: zero dataset size");
    if (updates[i].size() != updates[0].size()) throw std::invalid_argument("aggregate_weighted: parameter length mismatch");
    total += static_cast<double>(sizes[i]);
  }
  ParamVector out{std::vector<double>(updates[0].size(), 0.0)};
  for (std::size_t i = 0; i < updates.size(); ++i) {
    const double w = static_cast<double>(sizes[i]) / total;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * updates[i][j];
  }
  return out;
}

ParamVector aggregate_temporal(const ParamVector& fresh, std::span<const ParamVector> history, std::size_t window) {
  if (window < 1) throw std::invalid_argument("aggregate_temporal: window must be >= 1");
  const std::size_t used = std::min(window - 1, history.size());
  if (used == 0) return fresh;
  ParamVector out = fresh;
  for (std::size_t k = 0; k < used; ++k) {
    if (history[k].size() != fresh.size()) throw std::invalid_argument("aggregate_temporal: parameter length mismatch");
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += history[k][j];
  }
  const double count = static_cast<double>(used + 1);
  for (double& x : out.values) x /= count;
  return out;
}

}  // namespace pvfl::fl

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pvfl::harness {

struct CheckResult {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t instances = 0;
  bool passed = false;
};

/// Reverse-mode gradients of every primitive and of the full Q-network
/// (3 clients, 3 history tokens, d_token 8) against central differences.
std::vector<CheckResult> run_gradient_suite(std::size_t instances = 20, std::uint64_t seed = 7,
                                            double tolerance = 1e-4);

}  // namespace pvfl::harness

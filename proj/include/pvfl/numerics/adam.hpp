#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pvfl/numerics/tensor.hpp"

namespace pvfl::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for a fixed list of parameter tensors.
class AdamState {
 public:
  AdamState() = default;
  AdamState(AdamConfig config, std::span<const Tensor> params);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step() const { return step_; }
  const std::vector<Tensor>& first_moment() const { return m_; }
  const std::vector<Tensor>& second_moment() const { return v_; }

 private:
  friend void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Bias-corrected adaptive-moment update, applied in place.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace pvfl::num

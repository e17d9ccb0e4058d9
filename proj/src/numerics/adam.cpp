#include "pvfl/numerics/adam.hpp"

#include <cmath>
#include <string>

namespace pvfl::num {

AdamState::AdamState(AdamConfig config, std::span<const Tensor> params) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Tensor& p : params) {
    m_.push_back(Tensor::zeros(p.shape()));
    v_.push_back(Tensor::zeros(p.shape()));
  }
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " + std::to_string(grads.size()) +
                     " gradients, " + std::to_string(state.m_.size()) + " accumulators");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m_[i])) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " has shape " + shape_to_string(params[i].shape()) +
                       " but gradient has shape " + shape_to_string(grads[i].shape()));
    }
  }
  const AdamConfig& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto m = state.m_[i].data();
    auto v = state.v_[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    require_finite(params[i], "adam_step");
  }
}

}  // namespace pvfl::num

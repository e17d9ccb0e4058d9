#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pvfl/numerics/autodiff.hpp"

namespace pvfl::num {

/// Scalar-valued function of the given leaves, built from recorded primitives.
using TapeFunction = std::function<Var(Graph&, std::span<const Var>)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `f` at `point` with central differences.
/// Error per coordinate is |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const TapeFunction& f, std::span<const Tensor> point, double step = 1e-5);

/// Analytic gradients of `f` at `point`, one tensor per leaf.
std::vector<Tensor> gradients(const TapeFunction& f, std::span<const Tensor> point);

/// Value of `f` at `point` evaluated without gradient tracking.
double evaluate(const TapeFunction& f, std::span<const Tensor> point);

}  // namespace pvfl::num

#include "pvfl/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace pvfl::num {

std::vector<Tensor> gradients(const TapeFunction& f, std::span<const Tensor> point) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(g.param(t));
  Var out = f(g, leaves);
  g.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(leaves.size());
  for (Var v : leaves) grads.push_back(*g.grad(v));
  return grads;
}

double evaluate(const TapeFunction& f, std::span<const Tensor> point) {
  Graph g;
  std::vector<Var> leaves;
  leaves.reserve(point.size());
  for (const Tensor& t : point) leaves.push_back(g.constant(t));
  const Tensor& v = f(g, leaves).value();
  if (v.size() != 1) throw NumericError("grad_check: function must return a scalar");
  return v.item();
}

GradCheckReport grad_check(const TapeFunction& f, std::span<const Tensor> point, double step) {
  if (!(step > 0.0)) throw NumericError("grad_check: step must be positive");
  const std::vector<Tensor> analytic = gradients(f, point);
  std::vector<Tensor> work(point.begin(), point.end());
  GradCheckReport report;
  for (std::size_t i = 0; i < work.size(); ++i) {
    auto x = work[i].data();
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double orig = x[j];
      x[j] = orig + step;
      const double up = evaluate(f, work);
      x[j] = orig - step;
      const double down = evaluate(f, work);
      x[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      if (!std::isfinite(numeric)) throw NumericError("grad_check: non-finite finite-difference estimate");
      const double a = analytic[i].data()[j];
      report.max_rel_error = std::max(report.max_rel_error, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
      ++report.coordinates;
    }
  }
  return report;
}

}  // namespace pvfl::num

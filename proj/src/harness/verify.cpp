#include "pvfl/harness/verify.hpp"

#include <algorithm>
#include <random>

#include "pvfl/numerics/gradcheck.hpp"
#include "pvfl/qnet.hpp"
#include "pvfl/seeds.hpp"

namespace pvfl::harness {
namespace {

using num::Graph;
using num::Tensor;
using num::Var;

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(r * c);
  for (auto& x : v) x = n(rng);
  return Tensor({r, c}, std::move(v));
}

// Contracts an arbitrary output with fixed random weights so every entry matters.
Var weighted_sum(Var out, std::uint64_t seed) {
  Rng rng(seed);
  const Tensor& v = out.value();
  return num::sum(num::mul(out, out.graph().constant(random_tensor(v.rows(), v.cols(), rng))));
}

struct Case {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> point;
  num::TapeFunction f;
};

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto mat = [](std::size_t r, std::size_t c) { return [r, c](Rng& rng) { return std::vector{random_tensor(r, c, rng)}; }; };
  cases.push_back({"matmul", [](Rng& rng) { return std::vector{random_tensor(3, 4, rng), random_tensor(4, 2, rng)}; },
                   [](Graph&, std::span<const Var> x) { return weighted_sum(num::matmul(x[0], x[1]), 1); }});
  cases.push_back({"transpose", mat(3, 2),
                   [](Graph&, std::span<const Var> x) { return weighted_sum(num::transpose(x[0]), 2); }});
  cases.push_back({"add_sub_mul", [](Rng& rng) { return std::vector{random_tensor(2, 3, rng), random_tensor(2, 3, rng)}; },
                   [](Graph&, std::span<const Var> x) {
                     return weighted_sum(num::mul(num::add(x[0], x[1]), num::sub(x[0], x[1])), 3);
                   }});
  cases.push_back({"add_row_scale", [](Rng& rng) { return std::vector{random_tensor(3, 4, rng), random_tensor(1, 4, rng)}; },
                   [](Graph&, std::span<const Var> x) { return weighted_sum(num::scale(num::add_row(x[0], x[1]), 0.7), 4); }});
  cases.push_back({"softmax_rows", mat(3, 4),
                   [](Graph&, std::span<const Var> x) { return weighted_sum(num::softmax_rows(x[0]), 5); }});
  cases.push_back({"softmax_rows_causal", mat(4, 4), [](Graph&, std::span<const Var> x) {
                     const num::Mask m = num::Mask::causal(4);
                     return weighted_sum(num::softmax_rows(x[0], &m), 6);
                   }});
  cases.push_back({"layer_norm", mat(3, 5),
                   [](Graph&, std::span<const Var> x) { return weighted_sum(num::layer_norm(x[0]), 7); }});
  cases.push_back({"tanh", mat(3, 3), [](Graph&, std::span<const Var> x) { return weighted_sum(num::tanh(x[0]), 8); }});
  cases.push_back({"concat_mean_gather", [](Rng& rng) { return std::vector{random_tensor(4, 2, rng), random_tensor(4, 3, rng)}; },
                   [](Graph&, std::span<const Var> x) {
                     const std::vector<std::size_t> rows{3, 0, 3};
                     Var c = num::concat_cols(x[0], x[1]);
                     return num::add(weighted_sum(num::gather_rows(c, rows), 9), weighted_sum(num::mean_rows(c), 10));
                   }});
  cases.push_back({"mse", [](Rng& rng) { return std::vector{random_tensor(1, 5, rng), random_tensor(1, 5, rng)}; },
                   [](Graph&, std::span<const Var> x) { return num::mse(x[0], x[1]); }});
  return cases;
}

}  // namespace

std::vector<CheckResult> run_gradient_suite(std::size_t instances, std::uint64_t seed, double tolerance) {
  std::vector<CheckResult> results;
  Rng rng(seeds::derive(seed, "gradcheck"));

  for (const Case& c : primitive_cases()) {
    CheckResult r{c.name, 0.0, 0, true};
    for (std::size_t i = 0; i < std::max<std::size_t>(1, instances / 4); ++i) {
      const auto point = c.point(rng);
      r.max_rel_error = std::max(r.max_rel_error, num::grad_check(c.f, point).max_rel_error);
      ++r.instances;
    }
    r.passed = r.max_rel_error <= tolerance;
    results.push_back(r);
  }

  // Full Q-network: weights and both inputs are leaves.
  CheckResult full{"qnet_full", 0.0, 0, true};
  for (std::size_t i = 0; i < instances; ++i) {
    qnet::QNetConfig cfg;
    cfg.d_feat = 6;
    cfg.d_token = 8;
    cfg.d_emb = 4;
    cfg.heads = i % 2 == 0 ? 1 : 2;
    cfg.num_clients = 5;
    cfg.max_history = 3;
    const qnet::QNetState state(cfg, rng());
    std::vector<int> ids{4, 0, 2};
    std::shuffle(ids.begin(), ids.end(), rng);

    std::vector<Tensor> point;
    for (const Tensor* p : state.parameters()) point.push_back(*p);
    point.push_back(random_tensor(cfg.max_history, cfg.d_feat, rng, 0.5));
    point.push_back(random_tensor(ids.size(), cfg.d_feat, rng, 0.5));
    const std::uint64_t contract = rng();

    num::TapeFunction f = [&](Graph& g, std::span<const Var> x) {
      qnet::BoundQNet net = qnet::bind(g, state, false);
      std::size_t k = 0;
      net.weights.visit([&](Var& v) { v = x[k++]; });
      const qnet::QForward out = qnet::q_forward(net, x[k], x[k + 1], ids);
      return weighted_sum(out.q, contract);
    };
    full.max_rel_error = std::max(full.max_rel_error, num::grad_check(f, point).max_rel_error);
    ++full.instances;
  }
  full.passed = full.max_rel_error <= tolerance;
  results.push_back(full);
  return results;
}

}  // namespace pvfl::harness

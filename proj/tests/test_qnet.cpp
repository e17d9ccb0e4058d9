#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "pvfl/numerics/gradcheck.hpp"
#include "pvfl/qnet.hpp"

using namespace pvfl;
using namespace pvfl::qnet;
using num::Graph;
using num::Tensor;
using num::Var;

namespace {

QNetConfig small_config(std::size_t d_emb = 4, std::size_t heads = 1) {
  QNetConfig c;
  c.d_feat = 6;
  c.d_token = 8;
  c.d_emb = d_emb;
  c.heads = heads;
  c.num_clients = 7;
  c.max_history = 3;
  return c;
}

QInput random_input(const QNetConfig& c, std::size_t clients, std::size_t history, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  QInput in;
  std::vector<int> ids(c.num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  std::shuffle(ids.begin(), ids.end(), rng);
  in.ids.assign(ids.begin(), ids.begin() + clients);
  for (std::size_t i = 0; i < history; ++i) {
    in.history.emplace_back(c.d_feat);
    for (auto& x : in.history.back()) x = n(rng);
  }
  for (std::size_t i = 0; i < clients; ++i) {
    in.cluster.emplace_back(c.d_feat);
    for (auto& x : in.cluster.back()) x = n(rng);
  }
  return in;
}

}  // namespace

TEST(Projection, IsLinearWithInverseDFeatScale) {
  const ProjectionMatrix p(4, 5, 3);
  const std::vector<double> a{1, -2, 0.5, 3, 0}, b{0.25, 1, -1, 2, 7};
  std::vector<double> mix(5);
  for (int i = 0; i < 5; ++i) mix[i] = 2.0 * a[i] - 3.0 * b[i];
  const auto ra = random_project(a, p), rb = random_project(b, p), rm = random_project(mix, p);
  for (int r = 0; r < 4; ++r) {
    EXPECT_NEAR(rm[r], 2.0 * ra[r] - 3.0 * rb[r], 1e-12);
    double hand = 0.0;
    for (int c = 0; c < 5; ++c) hand += p.entry(r, c) * a[c];
    EXPECT_NEAR(ra[r], hand / 4.0, 1e-14);
  }
  EXPECT_THROW(random_project(std::vector<double>(3), p), std::invalid_argument);
}

TEST(Projection, EntriesAreStandardNormal) {
  const ProjectionMatrix p(64, 500, 9);
  double s = 0.0, s2 = 0.0;
  const double n = 64.0 * 500.0;
  for (std::size_t r = 0; r < 64; ++r) {
    for (std::size_t c = 0; c < 500; ++c) {
      s += p.entry(r, c);
      s2 += p.entry(r, c) * p.entry(r, c);
    }
  }
  EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Attention, MatchesBruteForceOracle) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  auto rnd = [&](std::size_t r, std::size_t c) {
    std::vector<double> v(r * c);
    for (auto& x : v) x = n(rng);
    return Tensor::matrix(r, c, v);
  };
  const Tensor X = rnd(3, 4), Y = rnd(2, 4), Wq = rnd(4, 2), Wk = rnd(4, 2), Wv = rnd(4, 2);
  Graph g;
  AttentionWeights<Var> w;
  w.wq = {g.constant(Wq)};
  w.wk = {g.constant(Wk)};
  w.wv = {g.constant(Wv)};
  const Tensor& out = attention(w, g.constant(X), g.constant(Y)).value();

  auto mm = [](const Tensor& a, const Tensor& b, std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
    return s;
  };
  for (std::size_t i = 0; i < 3; ++i) {
    double q[2], scores[2], z = 0.0;
    for (std::size_t d = 0; d < 2; ++d) q[d] = mm(X, Wq, i, d);
    for (std::size_t j = 0; j < 2; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < 2; ++d) dot += q[d] * mm(Y, Wk, j, d);
      scores[j] = std::exp(dot / std::sqrt(2.0));
      z += scores[j];
    }
    for (std::size_t d = 0; d < 2; ++d) {
      double o = 0.0;
      for (std::size_t j = 0; j < 2; ++j) o += scores[j] / z * mm(Y, Wv, j, d);
      EXPECT_NEAR(out(i, d), o, 1e-12);
    }
  }
}

TEST(QNet, ParameterLayoutAndCount) {
  const QNetConfig c = small_config(4, 2);
  const QNetState s(c, 1);
  // encoder 6*8+8+8*8+8, three attention blocks of 2 heads x 3 x (8x4), embedding 7x4,
  // value/advantage heads (12 -> 8 -> 1).
  const std::size_t expected = (48 + 8 + 64 + 8) + 3 * 2 * 3 * 32 + 28 + 2 * (12 * 8 + 8 + 8 + 1);
  EXPECT_EQ(s.parameter_count(), expected);
  EXPECT_EQ(s.positional_encoding().rows(), 3u);
  EXPECT_NEAR(s.positional_encoding()(0, 1), 1.0, 1e-15);  // cos(0)
  EXPECT_NEAR(s.positional_encoding()(1, 0), std::sin(1.0), 1e-15);
}

TEST(QNet, DuelingMeanEqualsValue) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const QNetConfig c = small_config(trial % 2 ? 0 : 4);
    const QNetState s(c, rng());
    const QInput in = random_input(c, 1 + trial % 5, 1 + trial % 3, rng);
    Graph g;
    const QForward f = q_forward(g, bind(g, s, false), in);
    const auto& q = f.q.value();
    double mean = 0.0;
    for (std::size_t i = 0; i < q.rows(); ++i) mean += q(i, 0);
    EXPECT_NEAR(mean / q.rows(), f.value.value().item(), 1e-12);
  }
}

TEST(QNet, PermutationEquivariant) {
  std::mt19937_64 rng(3);
  const QNetConfig c = small_config(4, 2);
  const QNetState s(c, 5);
  for (int trial = 0; trial < 10; ++trial) {
    const QInput in = random_input(c, 5, 3, rng);
    std::vector<std::size_t> perm(5);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    QInput p = in;
    for (std::size_t i = 0; i < 5; ++i) {
      p.ids[i] = in.ids[perm[i]];
      p.cluster[i] = in.cluster[perm[i]];
    }
    const auto qa = q_values(s, in), qb = q_values(s, p);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(qb[i], qa[perm[i]], 1e-12);
  }
}

TEST(QNet, HistoryOrderMatters) {
  std::mt19937_64 rng(4);
  const QNetConfig c = small_config();
  const QNetState s(c, 6);
  QInput in = random_input(c, 3, 3, rng);
  const auto a = q_values(s, in);
  std::swap(in.history[0], in.history[2]);
  const auto b = q_values(s, in);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a[i] - b[i]);
  EXPECT_GT(diff, 1e-9);
}

TEST(QNet, CausalMaskBlocksFuturePositions) {
  std::mt19937_64 rng(5);
  const QNetConfig c = small_config();
  const QNetState s(c, 7);
  const QInput in = random_input(c, 3, 3, rng);
  for (std::size_t k = 0; k < 3; ++k) {
    Graph g;
    const BoundQNet net = bind(g, s, false);
    std::vector<double> flat;
    for (const auto& h : in.history) flat.insert(flat.end(), h.begin(), h.end());
    Var hist = g.param(Tensor::matrix(3, c.d_feat, flat));
    std::vector<double> cf;
    for (const auto& h : in.cluster) cf.insert(cf.end(), h.begin(), h.end());
    const QForward f = q_forward(net, hist, g.constant(Tensor::matrix(3, c.d_feat, cf)), in.ids);
    const std::vector<std::size_t> row{k};
    g.backward(num::sum(num::gather_rows(f.temporal, row)));
    const Tensor& grad = *g.grad(hist);
    for (std::size_t j = 0; j < 3; ++j) {
      double mag = 0.0;
      for (std::size_t d = 0; d < c.d_feat; ++d) mag += std::abs(grad(j, d));
      if (j > k) EXPECT_EQ(mag, 0.0) << "token " << k << " sees position " << j;
      else EXPECT_GT(mag, 0.0);
    }
  }
}

TEST(QNet, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  const QNetConfig c = small_config(4, 2);
  const QNetState s(c, 8);
  const QInput in = random_input(c, 3, 3, rng);
  std::vector<Tensor> point;
  for (const Tensor* p : s.parameters()) point.push_back(*p);
  const num::TapeFunction f = [&](Graph& g, std::span<const Var> x) {
    BoundQNet net = bind(g, s, false);
    std::size_t k = 0;
    net.weights.visit([&](Var& v) { v = x[k++]; });
    const QForward out = q_forward(g, net, in);
    return num::sum(num::mul(out.q, g.constant(Tensor::matrix(3, 1, {0.3, -1.2, 0.8}))));
  };
  EXPECT_LE(num::grad_check(f, point).max_rel_error, 1e-6);
}

TEST(QNet, EmbeddingDisabledHasNoTable) {
  const QNetState s(small_config(0), 1);
  EXPECT_TRUE(s.weights().embedding.empty());
  std::mt19937_64 rng(7);
  const QInput in = random_input(s.config(), 2, 1, rng);
  EXPECT_EQ(q_values(s, in).size(), 2u);
}

TEST(QNet, RejectsInvalidInputs) {
  const QNetConfig c = small_config();
  const QNetState s(c, 1);
  std::mt19937_64 rng(8);
  QInput in = random_input(c, 2, 2, rng);
  QInput bad = in;
  bad.ids[1] = 7;
  EXPECT_THROW(q_values(s, bad), std::invalid_argument);
  bad = in;
  bad.ids[1] = bad.ids[0];
  EXPECT_THROW(q_values(s, bad), std::invalid_argument);
  bad = in;
  bad.cluster[0].pop_back();
  EXPECT_THROW(q_values(s, bad), std::invalid_argument);
  bad = in;
  bad.history.assign(4, in.history[0]);
  EXPECT_THROW(q_values(s, bad), std::invalid_argument);
  bad = in;
  bad.cluster.clear();
  bad.ids.clear();
  EXPECT_THROW(q_values(s, bad), std::invalid_argument);
}

TEST(QNet, CheckpointRoundTrip) {
  const QNetState s(small_config(4, 2), 11);
  const auto path = std::filesystem::temp_directory_path() / "pvfl_qnet_test.pvqn";
  s.save(path);
  const QNetState t = QNetState::load(path);
  EXPECT_EQ(t.config(), s.config());
  EXPECT_EQ(squared_distance(s, t), 0.0);
  {
    std::ofstream trunc(path, std::ios::binary | std::ios::trunc);
    trunc << "PVQN";
  }
  EXPECT_THROW(QNetState::load(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(QNet, SoftUpdate) {
  const QNetState online(small_config(), 1);
  QNetState target(small_config(), 2);
  const double d0 = squared_distance(online, target);
  QNetState copy = target;
  soft_update(online, copy, 0.0);
  EXPECT_EQ(squared_distance(copy, target), 0.0);
  for (int i = 0; i < 5; ++i) soft_update(online, target, 0.1);
  EXPECT_NEAR(squared_distance(online, target), d0 * std::pow(0.9, 10), 1e-12 * d0);
  soft_update(online, target, 1.0);
  EXPECT_EQ(squared_distance(online, target), 0.0);
  QNetState other(small_config(0), 3);
  EXPECT_THROW(soft_update(online, other, 0.5), std::invalid_argument);
}

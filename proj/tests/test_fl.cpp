#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <numeric>
#include <set>

#include "pvfl/fl/aggregation.hpp"
#include "pvfl/fl/classifier.hpp"
#include "pvfl/fl/dataset.hpp"
#include "pvfl/fl/metrics.hpp"
#include "pvfl/fl/partition.hpp"
#include "pvfl/fl/training.hpp"

using namespace pvfl::fl;

namespace {

LabeledDataset toy(std::size_t n, std::uint64_t seed, std::size_t classes = 2, std::size_t dim = 3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> x(n * dim);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % classes);
    for (std::size_t d = 0; d < dim; ++d) x[i * dim + d] = nd(rng) + (d == static_cast<std::size_t>(y[i]) % dim ? 1.5 : 0.0);
  }
  return LabeledDataset(dim, classes, x, y);
}

std::vector<int> labels_of(std::size_t n, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

void expect_exact_partition(const IndexSets& parts, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& p : parts) {
    for (std::size_t i : p) {
      ASSERT_LT(i, n);
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(seen[i], 1) << "index " << i;
}

// Independent forward pass: tanh hidden layers, softmax cross-entropy, mean over rows.
double ce_oracle(const Classifier& m, const ParamVector& p, const LabeledDataset& d) {
  const auto layers = m.unflatten(p);
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::vector<double> a(d.row(i).begin(), d.row(i).end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& L = layers[l];
      std::vector<double> z(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        z[o] = L.bias[o];
        for (std::size_t k = 0; k < L.in; ++k) z[o] += a[k] * L.weight[k * L.out + o];
      }
      if (l + 1 < layers.size()) {
        for (auto& v : z) v = std::tanh(v);
      }
      a = z;
    }
    double mx = *std::max_element(a.begin(), a.end());
    double s = 0.0;
    for (double v : a) s += std::exp(v - mx);
    total += -(a[d.label(i)] - mx - std::log(s));
  }
  return total / static_cast<double>(d.size());
}

}  // namespace

TEST(Dataset, BlobsAreSeededAndShareCentres) {
  BlobsConfig cfg;
  cfg.train_samples = 200;
  cfg.test_samples = 50;
  const auto a = make_blobs(cfg, 4);
  const auto b = make_blobs(cfg, 4);
  EXPECT_EQ(a.train.features(), b.train.features());
  EXPECT_EQ(a.test.labels(), b.test.labels());
  EXPECT_EQ(a.train.size(), 200u);
  EXPECT_EQ(a.test.size(), 50u);
  const auto c = make_blobs(cfg, 5);
  EXPECT_NE(a.train.features(), c.train.features());
}

TEST(Dataset, RejectsInvalidLabels) {
  EXPECT_THROW(LabeledDataset(1, 2, {0.0, 1.0}, {0, 2}), std::invalid_argument);
  EXPECT_THROW(LabeledDataset(2, 2, {0.0, 1.0, 2.0}, {0, 1}), std::invalid_argument);
}

TEST(Dataset, CsvLoaderReadsHeaderAndLabelColumn) {
  const auto path = std::filesystem::temp_directory_path() / "pvfl_test_loader.csv";
  {
    std::ofstream out(path);
    out << "\xEF\xBB\xBF" << "a,label,b\n1.5,1,2\n-1,0,0.25\n3,2,4\n";
  }
  const auto d = load_csv(path, "label");
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.feature_dim(), 2u);
  EXPECT_EQ(d.num_classes(), 3u);
  EXPECT_EQ(d.label(0), 1);
  EXPECT_DOUBLE_EQ(d.row(1)[1], 0.25);
  EXPECT_THROW(load_csv(path, "missing"), std::runtime_error);
  std::filesystem::remove(path);
}

TEST(Dataset, StratifiedHoldoutIsAPartitionAndKeepsClassShares) {
  const auto d = toy(400, 1, 4);
  const auto s = stratified_holdout(d, 0.05, 9);
  std::vector<std::size_t> all = s.holdout;
  all.insert(all.end(), s.rest.begin(), s.rest.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
  std::vector<int> per_class(4, 0);
  for (std::size_t i : s.holdout) ++per_class[d.label(i)];
  for (int c : per_class) EXPECT_EQ(c, 5);
}

TEST(Partition, DirichletOneClientTakesEverything) {
  const auto y = labels_of(50, 5, 1);
  const auto p = partition_dirichlet(y, 1, 0.1, 3);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].size(), 50u);
}

TEST(Partition, DirichletLargeAlphaIsNearUniform) {
  const auto y = labels_of(1000, 2, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = partition_dirichlet(y, 2, 1e6, seed);
    EXPECT_NEAR(static_cast<double>(p[0].size()), 500.0, 50.0);
    std::size_t zeros = 0;
    for (std::size_t i : p[0]) zeros += y[i] == 0;
    EXPECT_NEAR(static_cast<double>(zeros) / p[0].size(), 0.5, 0.1);
  }
}

TEST(Partition, DirichletRepairsEmptyShardsAndRejectsTooFewSamples) {
  const auto y = labels_of(60, 10, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = partition_dirichlet(y, 20, 0.01, seed);
    expect_exact_partition(p, y.size());
    for (const auto& s : p) EXPECT_FALSE(s.empty());
  }
  EXPECT_THROW(partition_dirichlet(labels_of(5, 2, 1), 6, 0.1, 0), std::invalid_argument);
}

TEST(Partition, LabelSkewTwoClassesPerClient) {
  const auto y = labels_of(5000, 10, 4);
  const auto p = partition_label_skew(y, 100, 2, 7);
  expect_exact_partition(p, y.size());
  for (const auto& s : p) {
    std::set<int> classes;
    for (std::size_t i : s) classes.insert(y[i]);
    EXPECT_EQ(classes.size(), 2u);
  }
}

TEST(Partition, LabelSkewAllClassesIsBalancedPerClass) {
  const auto y = labels_of(400, 4, 5);
  const auto p = partition_label_skew(y, 4, 4, 1);
  for (const auto& s : p) {
    std::vector<int> counts(4, 0);
    for (std::size_t i : s) ++counts[y[i]];
    for (int c : counts) EXPECT_EQ(c, 25);
  }
}

TEST(Partition, LabelSkewErrors) {
  const auto y = labels_of(100, 10, 1);
  EXPECT_THROW(partition_label_skew(y, 10, 11, 0), std::invalid_argument);
  EXPECT_THROW(partition_label_skew(y, 2, 2, 0), std::invalid_argument);  // 4 slots cannot cover 10 classes
}

TEST(Partition, IidIsExactAndBalanced) {
  const auto p = partition_iid(103, 10, 2);
  expect_exact_partition(p, 103);
  for (const auto& s : p) EXPECT_TRUE(s.size() == 10 || s.size() == 11);
}

TEST(Classifier, FlattenUnflattenRoundTrip) {
  const Classifier m(ClassifierSpec{{3, 5, 4, 2}});
  EXPECT_EQ(m.num_params(), 3u * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
  const ParamVector p = m.init(1);
  EXPECT_EQ(m.flatten(m.unflatten(p)), p);
  EXPECT_EQ(m.init(1), p);
  EXPECT_THROW(m.unflatten(ParamVector{std::vector<double>(3)}), std::invalid_argument);
}

TEST(Classifier, LossMatchesIndependentForwardPass) {
  const Classifier m(ClassifierSpec{{3, 4, 3}});
  const auto d = toy(17, 2, 3);
  const ParamVector p = m.init(3);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_NEAR(m.loss(p, d, all), ce_oracle(m, p, d), 1e-12);
}

TEST(Classifier, GradientMatchesFiniteDifferences) {
  const Classifier m(ClassifierSpec{{3, 4, 3, 2}});
  const auto d = toy(9, 4);
  ParamVector p = m.init(5);
  std::vector<std::size_t> all(d.size());
  std::iota(all.begin(), all.end(), 0);
  const auto lg = m.loss_and_grad(p, d, all);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector a = p, b = p;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (ce_oracle(m, a, d) - ce_oracle(m, b, d)) / 2e-6;
    EXPECT_NEAR(lg.grad[i], fd, 1e-7) << "coordinate " << i;
  }
}

TEST(Training, ZeroLearningRateIsIdentity) {
  const Classifier m(ClassifierSpec{{3, 4, 2}});
  const ClientShard shard{0, toy(20, 1)};
  const ParamVector p = m.init(1);
  LocalTrainConfig cfg;
  cfg.lr = 0.0;
  EXPECT_EQ(local_train(m, p, shard, cfg, 3), p);
  EXPECT_EQ(potential_update(m, p, shard, 0.0, 8, 3), p);
}

TEST(Training, FullBatchStepMatchesGradientOracle) {
  const Classifier m(ClassifierSpec{{3, 4, 2}});
  const ClientShard shard{0, toy(12, 2)};
  const ParamVector p = m.init(2);
  LocalTrainConfig cfg;
  cfg.lr = 0.1;
  cfg.batch_size = 64;
  cfg.epochs = 1;
  const ParamVector out = local_train(m, p, shard, cfg, 5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector a = p, b = p;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    const double fd = (ce_oracle(m, a, shard.data) - ce_oracle(m, b, shard.data)) / 2e-6;
    EXPECT_NEAR(out[i], p[i] - cfg.lr * fd, 1e-8);
  }
  EXPECT_EQ(potential_update(m, p, shard, cfg.lr, 64, 5), out);
}

TEST(Training, OneBatchOneEpochEqualsPotentialUpdate) {
  const Classifier m(ClassifierSpec{{3, 6, 2}});
  const ClientShard shard{3, toy(30, 8)};
  const ParamVector p = m.init(4);
  LocalTrainConfig cfg;
  cfg.lr = 0.05;
  cfg.batch_size = 30;
  cfg.epochs = 1;
  EXPECT_EQ(local_train(m, p, shard, cfg, 77), potential_update(m, p, shard, 0.05, 30, 77));
  EXPECT_EQ(potential_update(m, p, shard, 0.05, 8, 77), potential_update(m, p, shard, 0.05, 8, 77));
}

TEST(Training, HugeProximalTermPinsParameters) {
  const Classifier m(ClassifierSpec{{3, 4, 2}});
  const ClientShard shard{0, toy(40, 3)};
  const ParamVector p = m.init(6);
  LocalTrainConfig cfg;
  cfg.lr = 0.1;
  cfg.batch_size = 8;
  cfg.prox_mu = 1e6;
  const ParamVector out = local_train(m, p, shard, cfg, 2);
  std::vector<std::size_t> all(shard.data.size());
  std::iota(all.begin(), all.end(), 0);
  double gnorm = 0.0;
  for (double g : m.loss_and_grad(p, shard.data, all).grad.values) gnorm += g * g;
  EXPECT_LE(l2_distance(out, p), cfg.lr * std::sqrt(gnorm) / 1e3);
}

TEST(Training, ProximalStepIsImplicitInTheProximalTerm) {
  const Classifier m(ClassifierSpec{{3, 4, 2}});
  const ClientShard shard{0, toy(10, 3)};
  const ParamVector p = m.init(6);
  LocalTrainConfig cfg;
  cfg.lr = 0.1;
  cfg.batch_size = 10;
  cfg.epochs = 1;
  cfg.prox_mu = 0.5;
  std::vector<std::size_t> all(shard.data.size());
  std::iota(all.begin(), all.end(), 0);
  const ParamVector g = m.loss_and_grad(p, shard.data, all).grad;
  const ParamVector out = local_train(m, p, shard, cfg, 1);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(out[i], p[i] - 0.1 * g[i] / (1.0 + 0.1 * 0.5), 1e-14);
}

TEST(Training, EmptyShardIsAnError) {
  const Classifier m(ClassifierSpec{{3, 4, 2}});
  const ClientShard empty{0, LabeledDataset()};
  EXPECT_THROW(potential_update(m, m.init(1), empty, 0.1, 4, 1), std::invalid_argument);
}

TEST(Aggregation, WeightedExamples) {
  const ParamVector u{{1.0, 2.0}}, v{{5.0, -2.0}};
  const std::vector<ParamVector> ups{u, v};
  const std::vector<std::size_t> sizes{1, 3};
  const ParamVector w = aggregate_weighted(ups, sizes);
  EXPECT_DOUBLE_EQ(w[0], 0.25 * 1 + 0.75 * 5);
  EXPECT_DOUBLE_EQ(w[1], 0.25 * 2 - 0.75 * 2);
  const std::vector<std::size_t> equal{2, 2};
  EXPECT_DOUBLE_EQ(aggregate_weighted(ups, equal)[0], 3.0);
  EXPECT_EQ(aggregate_weighted(std::vector<ParamVector>{u}, std::vector<std::size_t>{7}), u);
  EXPECT_THROW(aggregate_weighted(std::vector<ParamVector>{}, std::vector<std::size_t>{}), std::invalid_argument);
}

TEST(Aggregation, WeightedIsPermutationInvariantAndIdempotent) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  std::vector<ParamVector> ups(5, ParamVector{std::vector<double>(7)});
  std::vector<std::size_t> sizes{3, 9, 1, 4, 4};
  for (auto& u : ups) for (auto& x : u.values) x = n(rng);
  const ParamVector base = aggregate_weighted(ups, sizes);
  std::vector<std::size_t> perm{4, 2, 0, 3, 1};
  std::vector<ParamVector> pu;
  std::vector<std::size_t> ps;
  for (std::size_t i : perm) {
    pu.push_back(ups[i]);
    ps.push_back(sizes[i]);
  }
  const ParamVector other = aggregate_weighted(pu, ps);
  for (std::size_t i = 0; i < base.size(); ++i) EXPECT_NEAR(base[i], other[i], 1e-14);
  const std::vector<ParamVector> same(4, ups[0]);
  const ParamVector id = aggregate_weighted(same, std::vector<std::size_t>{1, 5, 2, 8});
  for (std::size_t i = 0; i < id.size(); ++i) EXPECT_NEAR(id[i], ups[0][i], 1e-14);
}

TEST(Aggregation, TemporalWindow) {
  const ParamVector f{{4.0}}, w1{{2.0}}, w2{{0.0}}, w3{{-6.0}};
  const std::vector<ParamVector> hist{w1, w2, w3};
  EXPECT_EQ(aggregate_temporal(f, hist, 1), f);
  EXPECT_DOUBLE_EQ(aggregate_temporal(f, hist, 2)[0], 3.0);
  EXPECT_DOUBLE_EQ(aggregate_temporal(f, std::vector<ParamVector>{w1, w2}, 5)[0], 2.0);
  EXPECT_DOUBLE_EQ(aggregate_temporal(f, hist, 4)[0], 0.0);
  EXPECT_EQ(aggregate_temporal(f, std::vector<ParamVector>{}, 3), f);
  EXPECT_THROW(aggregate_temporal(f, hist, 0), std::invalid_argument);
}

TEST(Metrics, MacroF1Examples) {
  const std::vector<int> labels{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(macro_f1(labels, labels, 2), 1.0);
  const std::vector<int> all_zero{0, 0, 0, 0};
  EXPECT_NEAR(macro_f1(all_zero, labels, 2), 1.0 / 3.0, 1e-15);
  EXPECT_THROW(macro_f1(std::vector<int>{}, std::vector<int>{}, 2), std::invalid_argument);
}

TEST(Metrics, MacroF1MatchesConfusionMatrixOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> c(0, 4);
  std::vector<int> pred(100), lab(100);
  for (int i = 0; i < 100; ++i) {
    pred[i] = c(rng);
    lab[i] = c(rng);
  }
  int cm[5][5] = {};
  for (int i = 0; i < 100; ++i) ++cm[lab[i]][pred[i]];
  double sum = 0.0;
  for (int k = 0; k < 5; ++k) {
    double tp = cm[k][k], fp = 0, fn = 0;
    for (int j = 0; j < 5; ++j) {
      if (j == k) continue;
      fp += cm[j][k];
      fn += cm[k][j];
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    sum += p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  EXPECT_NEAR(macro_f1(pred, lab, 5), sum / 5, 1e-12);
  EXPECT_NEAR(accuracy(pred, lab), [&] {
    int hit = 0;
    for (int i = 0; i < 100; ++i) hit += pred[i] == lab[i];
    return hit / 100.0;
  }(), 1e-15);
}

TEST(Metrics, AbsentClassScoresZero) {
  const std::vector<int> y{0, 0};
  EXPECT_DOUBLE_EQ(macro_f1(y, y, 3), 1.0 / 3.0);
}

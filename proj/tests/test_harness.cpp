#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pvfl/harness/config.hpp"
#include "pvfl/harness/experiment.hpp"
#include "pvfl/harness/plot.hpp"
#include "pvfl/harness/summary.hpp"

using namespace pvfl;
using namespace pvfl::harness;

namespace {

MetricsLog make_log(const std::string& policy, std::uint64_t seed, const std::vector<double>& acc) {
  MetricsLog log;
  log.policy = policy;
  log.seed = seed;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    MetricsRow r;
    r.round = i;
    r.policy = policy;
    r.seed = seed;
    r.test_acc = acc[i];
    log.rows.push_back(r);
  }
  return log;
}

std::string tiny_config(const std::string& extra = "") {
  return R"({
    "dataset": {"kind": "blobs", "num_classes": 3, "feature_dim": 4, "train_samples": 240, "test_samples": 60},
    "partition": {"kind": "labelskew", "classes_per_client": 2},
    "num_clients": 6,
    "visibility": {"kind": "ms", "cluster_size": 3},
    "policies": ["stdqn", "random", "gradnorm", "fedprox_random", "temporal_avg_random"],
    "K": 2, "H": 2, "rounds": 6,
    "classifier": {"hidden": [8]},
    "qnet": {"d_feat": 8, "d_token": 8, "d_emb": 2},
    "agent": {"batch_size": 2, "train_start_windows": 2},
    "seeds": [3],
    "save_checkpoints": false)" +
         extra + "}";
}

}  // namespace

TEST(Config, ParsesKnownKeys) {
  const auto c = parse_config(tiny_config());
  EXPECT_EQ(c.num_clients, 6u);
  EXPECT_EQ(c.policies.size(), 5u);
  EXPECT_EQ(c.agent.K, 2u);
  EXPECT_EQ(c.agent.H, 2u);
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{8}));
  EXPECT_EQ(c.dataset.blobs.feature_dim, 4u);
}

TEST(Config, UnknownKeysAreFatal) {
  EXPECT_THROW(parse_config(tiny_config(R"(, "lamda": 0.3)")), ConfigError);
  EXPECT_THROW(parse_config(R"({"agent": {"gama": 0.9}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"policies": ["stdqn", "oracle"]})"), std::invalid_argument);
}

TEST(Config, RangeChecks) {
  EXPECT_THROW(parse_config(R"({"lambda": 1.5})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"K": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"visibility": {"kind": "ra", "p": 0.0}})"), ConfigError);
  EXPECT_THROW(parse_config("not json"), ConfigError);
}

TEST(Summary, SingleSeedHasZeroSpread) {
  const std::vector<MetricsLog> logs{make_log("A", 0, std::vector<double>(31, 0.8))};
  const auto s = summarize(logs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].final_mean, 0.8);
  EXPECT_DOUBLE_EQ(s[0].final_std, 0.0);
  EXPECT_NEAR(s[0].fluctuation_mean, 0.0, 1e-12);
  EXPECT_EQ(s[0].rounds, 30u);
}

TEST(Summary, FinalWindowAndFluctuationByHand) {
  // rounds 0..20 with acc = round / 100; last 10 rounds are 11..20.
  std::vector<double> acc;
  for (int i = 0; i <= 20; ++i) acc.push_back(i / 100.0);
  const MetricsLog log = make_log("A", 0, acc);
  EXPECT_NEAR(final_window_accuracy(log), 0.155, 1e-12);
  // ceil(0.2 * 20) = 4 rounds: 0.17..0.20, population std = 0.01 * sqrt(1.25).
  EXPECT_NEAR(fluctuation(log), 0.01 * std::sqrt(1.25), 1e-12);
  EXPECT_DOUBLE_EQ(final_window_accuracy(make_log("A", 0, {0.42})), 0.42);
}

TEST(Summary, AcrossSeeds) {
  const std::vector<MetricsLog> logs{make_log("A", 0, std::vector<double>(5, 0.6)),
                                     make_log("B", 0, std::vector<double>(5, 0.1)),
                                     make_log("A", 1, std::vector<double>(5, 0.8))};
  const auto s = summarize(logs);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].policy, "A");
  EXPECT_NEAR(s[0].final_mean, 0.7, 1e-12);
  EXPECT_NEAR(s[0].final_std, 0.1, 1e-12);
  EXPECT_EQ(s[0].seeds, 2u);
  const std::vector<MetricsLog> bad{make_log("A", 0, std::vector<double>(5, 0.6)),
                                    make_log("A", 1, std::vector<double>(6, 0.6))};
  EXPECT_THROW(summarize(bad), std::invalid_argument);
}

TEST(MovingAverage, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  const auto raw = moving_average(v, 1);
  EXPECT_EQ(raw.mean, v);
  for (double s : raw.std) EXPECT_EQ(s, 0.0);
  const auto w3 = moving_average(v, 3);
  ASSERT_EQ(w3.mean.size(), 2u);
  EXPECT_DOUBLE_EQ(w3.mean[0], 2.0);
  EXPECT_DOUBLE_EQ(w3.mean[1], 3.0);
  EXPECT_NEAR(w3.std[0], std::sqrt(2.0 / 3.0), 1e-12);
  const auto flat = moving_average(std::vector<double>(8, 0.5), 4);
  for (double s : flat.std) EXPECT_EQ(s, 0.0);
  EXPECT_THROW(moving_average(v, 5), std::invalid_argument);
  EXPECT_THROW(moving_average(v, 0), std::invalid_argument);
}

TEST(Plot, RendersSvgAndRejectsLongWindow) {
  const std::vector<MetricsLog> logs{make_log("A & B", 0, {0.1, 0.2, 0.4, 0.3})};
  const std::string svg = render_plot(logs, 2, "t");
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("A &amp; B"), std::string::npos);
  EXPECT_THROW(render_plot(logs, 5, "t"), std::invalid_argument);
}

TEST(Metrics, RoundTrip) {
  MetricsLog log = make_log("Random", 2, {0.1, 0.25, 0.3});
  log.rows[1].selected = {3, 9};
  log.rows[1].td_loss = 0.125;
  log.rows[2].wall_ms = 12.5;
  log.rows[2].reward = 1.0 / 3.0;
  std::ostringstream os;
  write_metrics(os, log);
  const MetricsLog back = parse_metrics(os.str());
  ASSERT_EQ(back.rows.size(), 3u);
  EXPECT_EQ(back.rows[1].selected, (std::vector<int>{3, 9}));
  EXPECT_EQ(back.rows[1].td_loss, 0.125);
  EXPECT_FALSE(back.rows[0].td_loss.has_value());
  EXPECT_EQ(back.rows[2].wall_ms, 12.5);
  EXPECT_NEAR(back.rows[2].reward, 1.0 / 3.0, 1e-10);
  EXPECT_THROW(parse_metrics("round,policy\n0,A\n"), std::runtime_error);
}

TEST(Experiment, AllPoliciesRunAndAreDeterministic) {
  const auto dir = std::filesystem::temp_directory_path() / "pvfl_harness_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig c = parse_config(tiny_config());
  c.out_dir = dir / "a";
  const auto a = run_experiment(c);
  c.out_dir = dir / "b";
  const auto b = run_experiment(c);
  ASSERT_EQ(a.files.size(), 5u);
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    std::ifstream fa(a.files[i]), fb(b.files[i]);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << a.files[i];
    const MetricsLog log = read_metrics(a.files[i]);
    EXPECT_EQ(log.rounds(), 6u);
    for (const auto& r : log.rows) {
      EXPECT_LE(r.selected.size(), 2u);
      EXPECT_LE(r.selected.size(), r.cluster_size);
    }
  }
  EXPECT_EQ(a.summary.size(), 5u);
  EXPECT_TRUE(std::filesystem::exists(dir / "a" / "summary.csv"));
  std::filesystem::remove_all(dir);
}

TEST(Experiment, ZeroRoundsSummarisesInitialModel) {
  ExperimentConfig c = parse_config(tiny_config());
  c.rounds = 0;
  c.policies = {agent::PolicyKind::Random};
  const Federation fed = build_federation(c, 3);
  const MetricsLog log = run_policy(c, fed, agent::PolicyKind::Random, 3, nullptr, {});
  ASSERT_EQ(log.rows.size(), 1u);
  const std::vector<MetricsLog> logs{log};
  EXPECT_DOUBLE_EQ(summarize(logs)[0].final_mean, log.rows[0].test_acc);
}

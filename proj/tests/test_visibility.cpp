#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "pvfl/visibility.hpp"

using pvfl::VisibilityProcess;

TEST(Visibility, MobileServerPartitionIsFixedAndCovers) {
  const auto v = VisibilityProcess::mobile_server(23, 5, 4);
  const auto& cl = v.clusters();
  ASSERT_EQ(cl.size(), 5u);
  std::set<int> all;
  for (std::size_t i = 0; i < cl.size(); ++i) {
    EXPECT_EQ(cl[i].size(), i + 1 < cl.size() ? 5u : 3u);
    EXPECT_TRUE(std::is_sorted(cl[i].begin(), cl[i].end()));
    all.insert(cl[i].begin(), cl[i].end());
  }
  EXPECT_EQ(all.size(), 23u);
  EXPECT_EQ(*all.rbegin(), 22);
}

TEST(Visibility, MobileServerDrawsWholeClustersUniformly) {
  const auto v = VisibilityProcess::mobile_server(100, 10, 1);
  std::map<std::vector<int>, int> freq;
  const int rounds = 10000;
  for (int t = 0; t < rounds; ++t) {
    const auto c = v.next_cluster(t);
    ASSERT_EQ(c.size(), 10u);
    ASSERT_NE(std::find(v.clusters().begin(), v.clusters().end(), c), v.clusters().end());
    ++freq[c];
  }
  ASSERT_EQ(freq.size(), 10u);
  const double p = 0.1, sigma = std::sqrt(rounds * p * (1 - p));
  for (const auto& [c, n] : freq) EXPECT_NEAR(n, rounds * p, 3 * sigma);
}

TEST(Visibility, RandomAvailabilityStatistics) {
  const auto v = VisibilityProcess::random_availability(100, 0.1, 2);
  double total = 0.0;
  int empty = 0;
  const int rounds = 10000;
  for (int t = 0; t < rounds; ++t) {
    const auto c = v.next_cluster(t);
    EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
    total += static_cast<double>(c.size());
    empty += c.empty();
  }
  const double sigma_mean = std::sqrt(100 * 0.1 * 0.9 / rounds);
  EXPECT_NEAR(total / rounds, 10.0, 3 * sigma_mean);
  EXPECT_LT(empty, 10);
}

TEST(Visibility, FullAvailabilityShowsEveryone) {
  const auto v = VisibilityProcess::random_availability(12, 1.0, 2);
  for (int t = 0; t < 20; ++t) EXPECT_EQ(v.next_cluster(t).size(), 12u);
}

TEST(Visibility, DeterministicPerRound) {
  const auto a = VisibilityProcess::random_availability(30, 0.3, 9);
  const auto b = VisibilityProcess::random_availability(30, 0.3, 9);
  for (int t = 50; t >= 0; --t) EXPECT_EQ(a.next_cluster(t), b.next_cluster(t));
  const auto m = VisibilityProcess::mobile_server(30, 4, 9);
  EXPECT_EQ(m.next_cluster(17), m.next_cluster(17));
}

TEST(Visibility, InvalidArguments) {
  EXPECT_THROW(VisibilityProcess::random_availability(10, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(VisibilityProcess::random_availability(10, 1.5, 1), std::invalid_argument);
  EXPECT_THROW(VisibilityProcess::mobile_server(10, 0, 1), std::invalid_argument);
  EXPECT_THROW(VisibilityProcess::mobile_server(0, 2, 1), std::invalid_argument);
}

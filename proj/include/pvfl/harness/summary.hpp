#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pvfl/harness/metrics_log.hpp"

namespace pvfl::harness {

/// Rounds averaged for the final-window accuracy.
inline constexpr std::size_t kFinalWindow = 10;
/// Fraction of the run used for the fluctuation statistic.
inline constexpr double kFluctuationFraction = 0.2;

/// Mean test accuracy of the last min(10, T) rounds; the initial row when T = 0.
double final_window_accuracy(const MetricsLog& log);

/// Population std of test accuracy over the last max(1, ceil(0.2 T)) rounds.
double fluctuation(const MetricsLog& log);

struct PolicySummary {
  std::string policy;
  std::size_t seeds = 0;
  std::uint64_t rounds = 0;
  double final_mean = 0.0;
  double final_std = 0.0;  // population std across seeds
  double fluctuation_mean = 0.0;
  std::vector<double> per_seed_final;
  std::vector<double> per_seed_fluctuation;
};

/// Groups logs by policy (first-appearance order). All logs must share one round count.
std::vector<PolicySummary> summarize(std::span<const MetricsLog> logs);

std::string format_summary_text(std::span<const PolicySummary> summary);
std::string format_summary_csv(std::span<const PolicySummary> summary);

/// Writes summary.txt and summary.csv into `dir`.
void write_summary(const std::filesystem::path& dir, std::span<const PolicySummary> summary);

}  // namespace pvfl::harness

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pvfl::harness {

/// One row per round. Round 0 is the evaluation of the initial model.
struct MetricsRow {
  std::uint64_t round = 0;
  std::string policy;
  std::uint64_t seed = 0;
  std::size_t cluster_size = 0;
  std::vector<int> selected;
  double reward = 0.0;
  double val_f1 = 0.0;
  double test_acc = 0.0;
  std::optional<double> td_loss;
  std::optional<double> wall_ms;
};

struct MetricsLog {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> rows;

  /// Number of communication rounds (rows after the initial one).
  std::uint64_t rounds() const { return rows.empty() ? 0 : rows.back().round; }
};

inline constexpr const char* kMetricsHeader =
    "round,policy,seed,cluster_size,selected,reward,val_f1,test_acc,td_loss,wall_ms";

/// Numbers use %.10g, selected IDs are ';'-joined, absent values are blank.
std::string format_row(const MetricsRow& row);
void write_metrics(std::ostream& out, const MetricsLog& log);

MetricsLog parse_metrics(const std::string& text, const std::string& source = "<metrics>");
MetricsLog read_metrics(const std::filesystem::path& path);

std::string format_number(double v);

}  // namespace pvfl::harness

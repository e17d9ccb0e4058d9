#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pvfl/harness/metrics_log.hpp"

namespace pvfl::harness {

/// Valid-mode moving average: point i summarises values[i .. i + window - 1].
struct Smoothed {
  std::vector<double> mean;
  std::vector<double> std;  // population std within each window
};

Smoothed moving_average(std::span<const double> values, std::size_t window);

/// Standalone SVG of test accuracy vs round, one smoothed line with a +-1 std
/// band per log. Errors if window is 0 or exceeds any log's length.
std::string render_plot(std::span<const MetricsLog> logs, std::size_t window, const std::string& title = "");
void emit_plot(std::span<const MetricsLog> logs, std::size_t window, const std::filesystem::path& path,
               const std::string& title = "");

}  // namespace pvfl::harness

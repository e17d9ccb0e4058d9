#include "pvfl/harness/summary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvfl::harness {
namespace {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::vector<double> tail_accuracy(const MetricsLog& log, std::size_t count) {
  if (log.rows.empty()) throw std::invalid_argument("summary: empty metrics log");
  const std::size_t rounds = log.rows.size() - 1;
  if (rounds == 0) return {log.rows.front().test_acc};
  count = std::min(count, rounds);
  std::vector<double> out;
  for (std::size_t i = log.rows.size() - count; i < log.rows.size(); ++i) out.push_back(log.rows[i].test_acc);
  return out;
}

}  // namespace

double final_window_accuracy(const MetricsLog& log) { return mean(tail_accuracy(log, kFinalWindow)); }

double fluctuation(const MetricsLog& log) {
  const std::size_t rounds = log.rows.empty() ? 0 : log.rows.size() - 1;
  const auto n = static_cast<std::size_t>(std::ceil(kFluctuationFraction * static_cast<double>(rounds)));
  return population_std(tail_accuracy(log, std::max<std::size_t>(1, n)));
}

std::vector<PolicySummary> summarize(std::span<const MetricsLog> logs) {
  if (logs.empty()) throw std::invalid_argument("summarize: no metrics logs");
  const std::uint64_t rounds = logs.front().rounds();
  for (const auto& log : logs) {
    if (log.rows.empty()) throw std::invalid_argument("summarize: empty metrics log");
    if (log.rounds() != rounds) {
      throw std::invalid_argument("summarize: mismatched round counts (" + std::to_string(rounds) + " vs " +
                                  std::to_string(log.rounds()) + " for " + log.policy + " seed " +
                                  std::to_string(log.seed) + ")");
    }
  }
  std::vector<PolicySummary> out;
  for (const auto& log : logs) {
    auto it = std::find_if(out.begin(), out.end(), [&](const PolicySummary& s) { return s.policy == log.policy; });
    if (it == out.end()) {
      out.push_back({});
      it = std::prev(out.end());
      it->policy = log.policy;
      it->rounds = rounds;
    }
    it->seeds += 1;
    it->per_seed_final.push_back(final_window_accuracy(log));
    it->per_seed_fluctuation.push_back(fluctuation(log));
  }
  for (auto& s : out) {
    s.final_mean = mean(s.per_seed_final);
    s.final_std = population_std(s.per_seed_final);
    s.fluctuation_mean = mean(s.per_seed_fluctuation);
  }
  return out;
}

std::string format_summary_text(std::span<const PolicySummary> summary) {
  std::ostringstream os;
  os << "Final-window test accuracy (mean +- std across seeds, last " << kFinalWindow << " rounds)\n";
  for (const auto& s : summary) {
    char line[256];
    std::snprintf(line, sizeof line, "%-40s %7.2f +- %5.2f  fluctuation %6.3f  (%zu seeds, %llu rounds)\n",
                  s.policy.c_str(), 100.0 * s.final_mean, 100.0 * s.final_std, 100.0 * s.fluctuation_mean, s.seeds,
                  static_cast<unsigned long long>(s.rounds));
    os << line;
  }
  return os.str();
}

std::string format_summary_csv(std::span<const PolicySummary> summary) {
  std::ostringstream os;
  os << "policy,seeds,rounds,final_acc_mean,final_acc_std,fluctuation_mean\n";
  for (const auto& s : summary) {
    os << s.policy << ',' << s.seeds << ',' << s.rounds << ',' << format_number(s.final_mean) << ','
       << format_number(s.final_std) << ',' << format_number(s.fluctuation_mean) << '\n';
  }
  return os.str();
}

void write_summary(const std::filesystem::path& dir, std::span<const PolicySummary> summary) {
  std::filesystem::create_directories(dir);
  std::ofstream txt(dir / "summary.txt");
  std::ofstream csv(dir / "summary.csv");
  if (!txt || !csv) throw std::runtime_error("cannot write summary files in " + dir.string());
  txt << format_summary_text(summary);
  csv << format_summary_csv(summary);
}

}  // namespace pvfl::harness

// pvfl: run experiments, summarise metric logs, plot curves, check gradients.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pvfl/harness/experiment.hpp"
#include "pvfl/harness/plot.hpp"
#include "pvfl/harness/summary.hpp"
#include "pvfl/harness/verify.hpp"

namespace h = pvfl::harness;

namespace {

int cmd_run(const std::string& config_path, const std::vector<std::uint64_t>& seeds, std::optional<std::uint64_t> rounds,
            const std::vector<std::string>& policies, const std::string& out) {
  h::ExperimentConfig cfg = h::load_config(config_path);
  if (!seeds.empty()) cfg.seeds = seeds;
  if (rounds) cfg.rounds = *rounds;
  if (!policies.empty()) {
    cfg.policies.clear();
    for (const auto& p : policies) cfg.policies.push_back(pvfl::agent::parse_policy(p));
  }
  if (const char* env = std::getenv("PVFL_OUT_DIR"); env && *env) cfg.out_dir = env;
  if (!out.empty()) cfg.out_dir = out;
  h::validate(cfg);

  const auto result = h::run_experiment(cfg);
  std::cout << h::format_summary_text(result.summary);
  std::cout << "wrote " << result.files.size() << " metric files and summary to " << cfg.out_dir.string() << '\n';
  return 0;
}

int cmd_summarize(const std::vector<std::string>& files, const std::string& out) {
  std::vector<h::MetricsLog> logs;
  for (const auto& f : files) logs.push_back(h::read_metrics(f));
  const auto summary = h::summarize(logs);
  std::cout << h::format_summary_text(summary);
  if (!out.empty()) h::write_summary(out, summary);
  return 0;
}

int cmd_plot(const std::vector<std::string>& files, std::size_t window, const std::string& out, const std::string& title) {
  std::vector<h::MetricsLog> logs;
  for (const auto& f : files) logs.push_back(h::read_metrics(f));
  h::emit_plot(logs, window, out, title);
  std::cout << "wrote " << out << '\n';
  return 0;
}

int cmd_gradcheck(std::size_t instances, std::uint64_t seed, double tol) {
  bool ok = true;
  for (const auto& r : h::run_gradient_suite(instances, seed, tol)) {
    std::printf("%-22s instances=%-3zu max_rel_error=%.3e  %s\n", r.name.c_str(), r.instances, r.max_rel_error,
                r.passed ? "PASS" : "FAIL");
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Client selection under partial visibility: experiments and tooling"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Execute an experiment config");
  std::string config_path, run_out;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> rounds;
  std::vector<std::string> policies;
  run->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seeds, "Override the seed list (repeatable)");
  run->add_option("--rounds", rounds, "Override the number of rounds");
  run->add_option("--policy", policies, "Override the policy list (repeatable)");
  run->add_option("--out", run_out, "Output directory (beats PVFL_OUT_DIR and the config)");

  auto* summ = app.add_subcommand("summarize", "Aggregate metric files into a comparison table");
  std::vector<std::string> summ_files;
  std::string summ_out;
  summ->add_option("files", summ_files, "Metric CSV files")->required()->check(CLI::ExistingFile);
  summ->add_option("--out", summ_out, "Directory for summary.txt / summary.csv");

  auto* plot = app.add_subcommand("plot", "Emit a smoothed accuracy chart (SVG)");
  std::vector<std::string> plot_files;
  std::size_t window = 10;
  std::string plot_out = "accuracy.svg", title;
  plot->add_option("files", plot_files, "Metric CSV files")->required()->check(CLI::ExistingFile);
  plot->add_option("--window", window, "Moving-average window")->check(CLI::PositiveNumber);
  plot->add_option("--out", plot_out, "Output SVG path");
  plot->add_option("--title", title, "Chart title");

  auto* grad = app.add_subcommand("gradcheck", "Run the numerics verification suite");
  std::size_t instances = 20;
  std::uint64_t gseed = 7;
  double tol = 1e-4;
  grad->add_option("--instances", instances, "Random Q-network instances");
  grad->add_option("--seed", gseed, "Seed");
  grad->add_option("--tol", tol, "Max relative error");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, seeds, rounds, policies, run_out);
    if (*summ) return cmd_summarize(summ_files, summ_out);
    if (*plot) return cmd_plot(plot_files, window, plot_out, title);
    if (*grad) return cmd_gradcheck(instances, gseed, tol);
  } catch (const std::exception& e) {
    std::cerr << "pvfl: error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

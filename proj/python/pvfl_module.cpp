#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pvfl/agent.hpp"
#include "pvfl/fl/metrics.hpp"
#include "pvfl/fl/partition.hpp"
#include "pvfl/harness/experiment.hpp"
#include "pvfl/harness/verify.hpp"
#include "pvfl/qnet.hpp"
#include "pvfl/visibility.hpp"

namespace py = pybind11;
using namespace pvfl;

namespace {

py::dict summary_dict(const harness::PolicySummary& s) {
  py::dict d;
  d["policy"] = s.policy;
  d["seeds"] = s.seeds;
  d["rounds"] = s.rounds;
  d["final_mean"] = s.final_mean;
  d["final_std"] = s.final_std;
  d["fluctuation_mean"] = s.fluctuation_mean;
  d["per_seed_final"] = s.per_seed_final;
  return d;
}

py::list summaries(const std::vector<harness::PolicySummary>& all) {
  py::list out;
  for (const auto& s : all) out.append(summary_dict(s));
  return out;
}

}  // namespace

PYBIND11_MODULE(_pvfl, m) {
  m.doc() = "Client selection under partial visibility: federated simulator and attention DQN";

  py::register_exception<harness::ConfigError>(m, "ConfigError", PyExc_ValueError);

  m.def(
      "run_experiment",
      [](const std::string& config_json, const std::string& out_dir, std::vector<std::uint64_t> seeds,
         std::optional<std::uint64_t> rounds, std::vector<std::string> policies) {
        harness::ExperimentConfig c = harness::parse_config(config_json);
        if (!seeds.empty()) c.seeds = seeds;
        if (rounds) c.rounds = *rounds;
        if (!policies.empty()) {
          c.policies.clear();
          for (const auto& p : policies) c.policies.push_back(agent::parse_policy(p));
        }
        if (!out_dir.empty()) c.out_dir = out_dir;
        harness::ExperimentResult r;
        {
          py::gil_scoped_release release;
          r = harness::run_experiment(c);
        }
        py::dict d;
        d["summary"] = summaries(r.summary);
        std::vector<std::string> files;
        for (const auto& f : r.files) files.push_back(f.string());
        d["files"] = files;
        return d;
      },
      py::arg("config_json"), py::arg("out_dir") = "", py::arg("seeds") = std::vector<std::uint64_t>{},
      py::arg("rounds") = py::none(), py::arg("policies") = std::vector<std::string>{},
      "Run an experiment described by a JSON string; returns the summary and metric file paths.");

  m.def(
      "summarize",
      [](const std::vector<std::string>& files) {
        std::vector<harness::MetricsLog> logs;
        for (const auto& f : files) logs.push_back(harness::read_metrics(f));
        return summaries(harness::summarize(logs));
      },
      py::arg("files"));

  m.def(
      "read_metrics",
      [](const std::string& path) {
        const auto log = harness::read_metrics(path);
        py::dict d;
        d["policy"] = log.policy;
        d["seed"] = log.seed;
        std::vector<std::uint64_t> rounds;
        std::vector<double> acc, reward;
        for (const auto& r : log.rows) {
          rounds.push_back(r.round);
          acc.push_back(r.test_acc);
          reward.push_back(r.reward);
        }
        d["round"] = rounds;
        d["test_acc"] = acc;
        d["reward"] = reward;
        return d;
      },
      py::arg("path"));

  m.def(
      "random_project",
      [](const std::vector<double>& w, std::size_t d_feat, std::uint64_t seed) {
        return qnet::random_project(w, qnet::ProjectionMatrix(d_feat, w.size(), seed));
      },
      py::arg("w"), py::arg("d_feat"), py::arg("seed"));

  m.def(
      "multistep_target",
      [](const std::vector<double>& rewards, double gamma, std::optional<double> bootstrap) {
        return agent::multistep_target(rewards, gamma, bootstrap);
      },
      py::arg("rewards"), py::arg("gamma"), py::arg("bootstrap") = py::none());

  m.def(
      "select_action",
      [](const std::vector<double>& q, const std::vector<int>& ids, std::size_t K, double epsilon, std::uint64_t seed) {
        Rng rng(seed);
        return agent::select_action(q, ids, K, epsilon, rng);
      },
      py::arg("q"), py::arg("ids"), py::arg("K"), py::arg("epsilon") = 0.0, py::arg("seed") = 0);

  m.def("reward_update", &reward_update, py::arg("prev"), py::arg("f1"), py::arg("lam"));

  m.def(
      "macro_f1",
      [](const std::vector<int>& pred, const std::vector<int>& labels, std::size_t num_classes) {
        return fl::macro_f1(pred, labels, num_classes);
      },
      py::arg("predictions"), py::arg("labels"), py::arg("num_classes"));

  m.def(
      "partition_dirichlet",
      [](const std::vector<int>& labels, std::size_t n, double alpha, std::uint64_t seed) {
        return fl::partition_dirichlet(labels, n, alpha, seed);
      },
      py::arg("labels"), py::arg("num_clients"), py::arg("alpha"), py::arg("seed"));

  m.def(
      "partition_label_skew",
      [](const std::vector<int>& labels, std::size_t n, std::size_t c, std::uint64_t seed) {
        return fl::partition_label_skew(labels, n, c, seed);
      },
      py::arg("labels"), py::arg("num_clients"), py::arg("classes_per_client"), py::arg("seed"));

  py::class_<VisibilityProcess>(m, "VisibilityProcess")
      .def_static("mobile_server", &VisibilityProcess::mobile_server, py::arg("num_clients"), py::arg("cluster_size"),
                  py::arg("seed"))
      .def_static("random_availability", &VisibilityProcess::random_availability, py::arg("num_clients"), py::arg("p"),
                  py::arg("seed"))
      .def("next_cluster", &VisibilityProcess::next_cluster, py::arg("round"))
      .def_property_readonly("clusters", &VisibilityProcess::clusters);

  m.def(
      "gradient_suite",
      [](std::size_t instances, std::uint64_t seed, double tol) {
        py::list out;
        for (const auto& r : harness::run_gradient_suite(instances, seed, tol)) {
          py::dict d;
          d["name"] = r.name;
          d["max_rel_error"] = r.max_rel_error;
          d["instances"] = r.instances;
          d["passed"] = r.passed;
          out.append(d);
        }
        return out;
      },
      py::arg("instances") = 20, py::arg("seed") = 7, py::arg("tol") = 1e-4);
}

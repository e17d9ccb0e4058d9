#include "pvfl/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace pvfl::harness {
namespace {

using json = nlohmann::json;

// Reads fields out of one JSON object and rejects any key it was not asked about.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, path(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + path(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void validate(const ExperimentConfig& c) {
  const auto& d = c.dataset;
  require(d.kind == "blobs" || d.kind == "csv", "dataset.kind must be 'blobs' or 'csv'");
  if (d.kind == "blobs") {
    require(d.blobs.num_classes >= 2, "dataset.num_classes must be >= 2");
    require(d.blobs.feature_dim >= 1, "dataset.feature_dim must be >= 1");
    require(d.blobs.train_samples >= c.num_clients, "dataset.train_samples must be >= num_clients");
    require(d.blobs.test_samples >= 1, "dataset.test_samples must be >= 1");
    require(d.blobs.center_scale > 0.0 && d.blobs.noise_std > 0.0, "dataset.center_scale and noise_std must be positive");
  } else {
    require(!d.path.empty(), "dataset.path is required for csv datasets");
    require(d.test_fraction > 0.0 && d.test_fraction < 1.0, "dataset.test_fraction must be in (0, 1)");
  }
  const auto& p = c.partition;
  require(p.kind == "iid" || p.kind == "dirichlet" || p.kind == "labelskew",
          "partition.kind must be 'iid', 'dirichlet' or 'labelskew'");
  require(p.alpha > 0.0, "partition.alpha must be positive");
  require(p.classes_per_client >= 1, "partition.classes_per_client must be >= 1");
  require(c.num_clients >= 1, "num_clients must be >= 1");
  const auto& v = c.visibility;
  require(v.kind == "ms" || v.kind == "ra", "visibility.kind must be 'ms' or 'ra'");
  require(v.cluster_size >= 1 && v.cluster_size <= c.num_clients, "visibility.cluster_size must be in [1, num_clients]");
  require(v.p > 0.0 && v.p <= 1.0, "visibility.p must be in (0, 1]");
  require(!c.policies.empty(), "policies must not be empty");
  require(c.K >= 1, "K must be >= 1");
  require(c.H >= 1, "H must be >= 1");
  require(c.lambda > 0.0 && c.lambda <= 1.0, "lambda must be in (0, 1]");
  require(c.local.lr > 0.0, "local.lr must be positive");
  require(c.local.batch_size >= 1, "local.batch_size must be >= 1");
  require(c.local.epochs >= 1, "local.epochs must be >= 1");
  require(c.fedprox_mu >= 0.0, "local.prox_mu must be >= 0");
  for (std::size_t h : c.hidden) require(h >= 1, "classifier.hidden widths must be >= 1");
  require(c.d_feat >= 1 && c.d_token >= 1, "qnet.d_feat and qnet.d_token must be >= 1");
  require(c.heads >= 1 && c.d_token % c.heads == 0, "qnet.heads must divide qnet.d_token");
  require(c.temporal_window >= 1, "baselines.temporal_window must be >= 1");
  require(!c.seeds.empty(), "seeds must not be empty");
  require(c.validation_fraction > 0.0 && c.validation_fraction < 1.0, "validation_fraction must be in (0, 1)");
  try {
    agent::validate(c.agent);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  require(c.agent.K == c.K && c.agent.H == c.H, "agent K/H must mirror the top-level K/H");
}

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  ExperimentConfig c;
  Section top(root, "");

  {
    Section s = top.sub("dataset");
    s.get("kind", c.dataset.kind);
    s.get("num_classes", c.dataset.blobs.num_classes);
    s.get("feature_dim", c.dataset.blobs.feature_dim);
    s.get("train_samples", c.dataset.blobs.train_samples);
    s.get("test_samples", c.dataset.blobs.test_samples);
    s.get("center_scale", c.dataset.blobs.center_scale);
    s.get("noise_std", c.dataset.blobs.noise_std);
    std::string path, test_path;
    s.get("path", path);
    s.get("test_path", test_path);
    c.dataset.path = path;
    c.dataset.test_path = test_path;
    s.get("label_column", c.dataset.label_column);
    s.get("test_fraction", c.dataset.test_fraction);
    c.dataset.num_classes = c.dataset.kind == "csv" && s.has("num_classes") ? c.dataset.blobs.num_classes : 0;
    s.finish();
  }
  {
    Section s = top.sub("partition");
    s.get("kind", c.partition.kind);
    s.get("alpha", c.partition.alpha);
    s.get("classes_per_client", c.partition.classes_per_client);
    s.finish();
  }
  top.get("num_clients", c.num_clients);
  {
    Section s = top.sub("visibility");
    s.get("kind", c.visibility.kind);
    s.get("cluster_size", c.visibility.cluster_size);
    s.get("p", c.visibility.p);
    s.finish();
  }
  {
    std::vector<std::string> keys;
    top.get("policies", keys);
    if (root.contains("policies")) {
      c.policies.clear();
      try {
        for (const auto& k : keys) c.policies.push_back(agent::parse_policy(k));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("policies: ") + e.what());
      }
    }
  }
  top.get("K", c.K);
  top.get("H", c.H);
  top.get("lambda", c.lambda);
  top.get("rounds", c.rounds);
  {
    Section s = top.sub("local");
    s.get("lr", c.local.lr);
    s.get("batch_size", c.local.batch_size);
    s.get("epochs", c.local.epochs);
    s.get("prox_mu", c.fedprox_mu);
    s.finish();
  }
  {
    Section s = top.sub("classifier");
    s.get("hidden", c.hidden);
    s.finish();
  }
  {
    Section s = top.sub("qnet");
    s.get("d_feat", c.d_feat);
    s.get("d_token", c.d_token);
    s.get("d_emb", c.d_emb);
    s.get("heads", c.heads);
    s.finish();
  }
  {
    Section s = top.sub("agent");
    auto& a = c.agent;
    s.get("gamma", a.gamma);
    s.get("tau", a.tau);
    s.get("eps_start", a.eps_start);
    s.get("eps_end", a.eps_end);
    s.get("eps_decay_fraction", a.eps_decay_fraction);
    s.get("batch_size", a.batch_size);
    s.get("train_start_windows", a.train_start_windows);
    s.get("buffer_capacity", a.buffer_capacity);
    s.get("lr", a.optimizer.lr);
    s.get("beta1", a.optimizer.beta1);
    s.get("beta2", a.optimizer.beta2);
    s.get("adam_eps", a.optimizer.eps);
    s.finish();
  }
  {
    Section s = top.sub("baselines");
    s.get("temporal_window", c.temporal_window);
    s.finish();
  }
  top.get("seeds", c.seeds);
  top.get("validation_fraction", c.validation_fraction);
  std::string out;
  top.get("out_dir", out);
  if (!out.empty()) c.out_dir = out;
  top.get("log_wall_time", c.log_wall_time);
  top.get("save_checkpoints", c.save_checkpoints);
  top.finish();

  c.agent.K = c.K;
  c.agent.H = c.H;
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace pvfl::harness

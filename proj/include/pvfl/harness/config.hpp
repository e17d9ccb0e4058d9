#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvfl/agent.hpp"
#include "pvfl/fl/dataset.hpp"
#include "pvfl/fl/training.hpp"

namespace pvfl::harness {

/// Raised for any invalid or unknown configuration entry.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetSpec {
  std::string kind = "blobs";  // blobs | csv
  fl::BlobsConfig blobs;
  std::filesystem::path path;       // csv
  std::filesystem::path test_path;  // csv, optional; otherwise test_fraction is held out
  std::string label_column = "label";
  std::size_t num_classes = 0;  // csv, 0 = infer
  double test_fraction = 0.2;
};

struct PartitionSpec {
  std::string kind = "dirichlet";  // iid | dirichlet | labelskew
  double alpha = 0.1;
  std::size_t classes_per_client = 2;
};

struct VisibilitySpec {
  std::string kind = "ms";  // ms | ra
  std::size_t cluster_size = 10;
  double p = 0.1;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  std::size_t num_clients = 100;
  VisibilitySpec visibility;
  std::vector<agent::PolicyKind> policies{agent::PolicyKind::STDQN, agent::PolicyKind::Random};
  std::size_t K = 5;
  std::size_t H = 5;
  double lambda = 0.5;
  std::uint64_t rounds = 300;
  fl::LocalTrainConfig local;
  double fedprox_mu = 0.01;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t d_feat = 128;
  std::size_t d_token = 64;
  std::size_t d_emb = 16;
  std::size_t heads = 1;
  agent::AgentConfig agent;  // K and H mirror the top-level values
  std::size_t temporal_window = 5;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  double validation_fraction = 0.05;
  std::filesystem::path out_dir = "runs";
  bool log_wall_time = false;
  bool save_checkpoints = true;
};

/// Parses a JSON document. Unknown keys and out-of-range values are fatal.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Range checks shared by the parser and programmatic callers.
void validate(const ExperimentConfig& config);

}  // namespace pvfl::harness

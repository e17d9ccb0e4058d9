#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "pvfl/env.hpp"
#include "pvfl/harness/config.hpp"
#include "pvfl/harness/metrics_log.hpp"
#include "pvfl/harness/summary.hpp"

namespace pvfl::harness {

/// Everything a seed's runs share: data, partition, visibility, initial model.
struct Federation {
  fl::Classifier model{fl::ClassifierSpec{{1, 2}}};
  std::vector<fl::ClientShard> shards;
  fl::LabeledDataset validation;
  fl::LabeledDataset test;
  std::shared_ptr<const VisibilityProcess> visibility;
  fl::ParamVector initial;
};

Federation build_federation(const ExperimentConfig& config, std::uint64_t seed);

/// Environment configured for one policy (aggregation window, proximal term, projection).
FederatedEnv make_env(const ExperimentConfig& config, const Federation& fed, agent::PolicyKind policy, std::uint64_t seed);

/// Runs one (policy, seed). When `sink` is set each row is written and flushed
/// as soon as it is produced, so a failing run leaves a partial log behind.
MetricsLog run_policy(const ExperimentConfig& config, const Federation& fed, agent::PolicyKind policy,
                      std::uint64_t seed, std::ostream* sink = nullptr,
                      const std::filesystem::path& checkpoint_dir = {});

struct ExperimentResult {
  std::vector<MetricsLog> logs;
  std::vector<PolicySummary> summary;
  std::vector<std::filesystem::path> files;
};

std::filesystem::path metrics_path(const std::filesystem::path& dir, agent::PolicyKind policy, std::uint64_t seed);

/// All policies x seeds; writes metric files, summary.txt/.csv and checkpoints to config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace pvfl::harness

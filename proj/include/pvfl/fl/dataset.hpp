#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pvfl/seeds.hpp"

namespace pvfl::fl {

/// Row-major feature matrix with integer class labels.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::size_t feature_dim, std::size_t num_classes, std::vector<double> features, std::vector<int> labels);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_classes() const { return num_classes_; }

  std::span<const double> row(std::size_t i) const { return {features_.data() + i * feature_dim_, feature_dim_}; }
  int label(std::size_t i) const { return labels_[i]; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<double>& features() const { return features_; }

  LabeledDataset subset(std::span<const std::size_t> indices) const;

 private:
  std::size_t feature_dim_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
};

struct ClientShard {
  int client_id = 0;
  LabeledDataset data;
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Isotropic Gaussian blobs: class centres ~ N(0, center_scale^2 I), samples
/// centre + N(0, noise_std^2 I). Train and test share the centres.
struct BlobsConfig {
  std::size_t num_classes = 10;
  std::size_t feature_dim = 16;
  std::size_t train_samples = 4000;
  std::size_t test_samples = 1000;
  double center_scale = 1.0;
  double noise_std = 1.0;
};

TrainTestSplit make_blobs(const BlobsConfig& config, std::uint64_t seed);

/// Comma-separated file with a header row. The column named `label_column`
/// holds non-negative integer class IDs; every other column is a feature.
/// `num_classes` of 0 infers max(label) + 1.
LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column, std::size_t num_classes = 0);

struct HoldoutSplit {
  std::vector<std::size_t> holdout;
  std::vector<std::size_t> rest;
};

/// Stratified holdout: from each class, round(fraction * count) samples
/// (at least one when the class has two or more) go to the holdout.
HoldoutSplit stratified_holdout(const LabeledDataset& data, double fraction, std::uint64_t seed);

}  // namespace pvfl::fl

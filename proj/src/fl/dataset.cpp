#include "pvfl/fl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pvfl::fl {

LabeledDataset::LabeledDataset(std::size_t feature_dim, std::size_t num_classes, std::vector<double> features,
                               std::vector<int> labels)
    : feature_dim_(feature_dim), num_classes_(num_classes), features_(std::move(features)), labels_(std::move(labels)) {
  if (feature_dim_ == 0) throw std::invalid_argument("dataset: feature_dim must be positive");
  if (features_.size() != labels_.size() * feature_dim_) {
    throw std::invalid_argument("dataset: " + std::to_string(features_.size()) + " feature values for " +
                                std::to_string(labels_.size()) + " labels of dimension " + std::to_string(feature_dim_));
  }
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
      throw std::invalid_argument("dataset: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(num_classes_) + ")");
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> f;
  std::vector<int> y;
  f.reserve(indices.size() * feature_dim_);
  y.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw std::out_of_range("dataset: subset index " + std::to_string(i) + " out of range");
    auto r = row(i);
    f.insert(f.end(), r.begin(), r.end());
    y.push_back(labels_[i]);
  }
  return LabeledDataset(feature_dim_, num_classes_, std::move(f), std::move(y));
}

TrainTestSplit make_blobs(const BlobsConfig& c, std::uint64_t seed) {
  if (c.num_classes < 2 || c.feature_dim == 0 || c.train_samples == 0 || c.test_samples == 0) {
    throw std::invalid_argument("make_blobs: need >= 2 classes, positive dimension and sample counts");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centers(c.num_classes * c.feature_dim);
  for (double& x : centers) x = c.center_scale * normal(rng);

  auto sample = [&](std::size_t n) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % c.num_classes);
    std::shuffle(labels.begin(), labels.end(), rng);
    std::vector<double> features(n * c.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const double* mu = centers.data() + static_cast<std::size_t>(labels[i]) * c.feature_dim;
      for (std::size_t j = 0; j < c.feature_dim; ++j) features[i * c.feature_dim + j] = mu[j] + c.noise_std * normal(rng);
    }
    return LabeledDataset(c.feature_dim, c.num_classes, std::move(features), std::move(labels));
  };
  TrainTestSplit split;
  split.train = sample(c.train_samples);
  split.test = sample(c.test_samples);
  return split;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t b = 0;
    while (b < cell.size() && cell[b] == ' ') ++b;
    out.push_back(cell.substr(b));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw std::runtime_error("load_csv: line " + std::to_string(line_no) + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column, std::size_t num_classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: " + path.string() + " is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split_line(line);
  const auto it = std::find(header.begin(), header.end(), label_column);
  if (it == header.end()) throw std::runtime_error("load_csv: no column named '" + label_column + "'");
  const std::size_t label_idx = static_cast<std::size_t>(it - header.begin());
  const std::size_t dim = header.size() - 1;
  if (dim == 0) throw std::runtime_error("load_csv: no feature columns");

  std::vector<double> features;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("load_csv: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                               " fields, expected " + std::to_string(header.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (j == label_idx) {
        const double y = parse_double(cells[j], line_no);
        if (y < 0 || y != std::floor(y)) {
          throw std::runtime_error("load_csv: line " + std::to_string(line_no) + ": label must be a non-negative integer");
        }
        labels.push_back(static_cast<int>(y));
      } else {
        features.push_back(parse_double(cells[j], line_no));
      }
    }
  }
  if (labels.empty()) throw std::runtime_error("load_csv: " + path.string() + " has no data rows");
  const std::size_t inferred = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  return LabeledDataset(dim, num_classes == 0 ? inferred : num_classes, std::move(features), std::move(labels));
}

HoldoutSplit stratified_holdout(const LabeledDataset& data, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) throw std::invalid_argument("stratified_holdout: fraction must be in [0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  Rng rng(seed);
  HoldoutSplit split;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (fraction > 0.0 && k == 0 && idx.size() >= 2) k = 1;
    k = std::min(k, idx.size());
    split.holdout.insert(split.holdout.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    split.rest.insert(split.rest.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(split.holdout.begin(), split.holdout.end());
  std::sort(split.rest.begin(), split.rest.end());
  return split;
}

}  // namespace pvfl::fl

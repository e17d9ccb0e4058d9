#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pvfl/fl/dataset.hpp"
#include "pvfl/seeds.hpp"

namespace pvfl::fl {

/// Flattened classifier parameters: the unit exchanged between server and clients.
struct ParamVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  bool operator==(const ParamVector&) const = default;
};

double l2_distance(const ParamVector& a, const ParamVector& b);

/// Layer widths from input to classes; tanh between hidden layers, softmax output.
struct ClassifierSpec {
  std::vector<std::size_t> widths;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // in x out, row-major
  std::vector<double> bias;    // out
};

struct LossAndGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Fully connected tanh classifier trained with softmax cross-entropy.
/// Flattened layout: for each layer, weight (in x out row-major) then bias.
class Classifier {
 public:
  explicit Classifier(ClassifierSpec spec);

  const ClassifierSpec& spec() const { return spec_; }
  std::size_t num_params() const { return num_params_; }
  std::size_t input_dim() const { return spec_.widths.front(); }
  std::size_t num_classes() const { return spec_.widths.back(); }

  /// Glorot-uniform weights, zero biases.
  ParamVector init(std::uint64_t seed) const;

  std::vector<DenseLayer> unflatten(const ParamVector& params) const;
  ParamVector flatten(std::span<const DenseLayer> layers) const;

  /// Mean cross-entropy and its gradient over the rows `indices` of `data`.
  LossAndGrad loss_and_grad(const ParamVector& params, const LabeledDataset& data,
                            std::span<const std::size_t> indices) const;
  double loss(const ParamVector& params, const LabeledDataset& data, std::span<const std::size_t> indices) const;

  std::vector<int> predict(const ParamVector& params, const LabeledDataset& data) const;

 private:
  void check(const ParamVector& params) const;

  ClassifierSpec spec_;
  std::size_t num_params_ = 0;
};

}  // namespace pvfl::fl

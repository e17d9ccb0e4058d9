#include "pvfl/fl/metrics.hpp"

#include <stdexcept>
#include <vector>

namespace pvfl::fl {

double macro_f1(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes) {
  if (predictions.empty()) throw std::invalid_argument("macro_f1: empty input");
  if (predictions.size() != labels.size()) throw std::invalid_argument("macro_f1: length mismatch");
  if (num_classes == 0) throw std::invalid_argument("macro_f1: num_classes must be positive");
  std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes || p < 0 || static_cast<std::size_t>(p) >= num_classes) {
      throw std::invalid_argument("macro_f1: class ID outside [0, num_classes)");
    }
    if (p == y) {
      ++tp[static_cast<std::size_t>(y)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  double sum = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom > 0) sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(num_classes);
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  if (predictions.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace pvfl::fl

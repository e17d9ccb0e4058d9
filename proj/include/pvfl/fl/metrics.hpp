#pragma once

#include <cstddef>
#include <span>

namespace pvfl::fl {

/// Unweighted mean of per-class F1 over all `num_classes` classes. A class with
/// no true positives, false positives or false negatives scores 0.
double macro_f1(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

}  // namespace pvfl::fl

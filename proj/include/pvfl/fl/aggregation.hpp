#pragma once

#include <cstddef>
#include <span>

#include "pvfl/fl/classifier.hpp"

namespace pvfl::fl {

/// Dataset-size weighted average: sum_i (n_i / sum_j n_j) * W_i, accumulated in input order.
ParamVector aggregate_weighted(std::span<const ParamVector> updates, std::span<const std::size_t> sizes);

/// Mean of `fresh` and the newest min(window - 1, history.size()) entries of
/// `history` (newest first). window == 1 returns `fresh` unchanged.
ParamVector aggregate_temporal(const ParamVector& fresh, std::span<const ParamVector> history, std::size_t window);

}  // namespace pvfl::fl

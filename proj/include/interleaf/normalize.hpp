#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "interleaf/episode.hpp"

namespace interleaf {

enum class Direction { Forward, Inverse };

/// Min/max per dimension over every action *and* proprio vector.
/// Throws ValidationError when there are no frames.
NormalizationStats compute_norm_stats(std::span<const Episode> episodes, std::string label = {});

/// Forward: a' = 2 (a - min) / (max - min) - 1, degenerate dimensions map to 0.
/// Inverse: exact algebraic inverse; degenerate dimensions map back to min.
/// Out-of-range inputs are clamped; when `clamped` is non-null it is
/// incremented once per clamped entry.
Pose7 normalize_action(const Pose7& value, const NormalizationStats& stats, Direction direction,
                       std::size_t* clamped = nullptr);

/// Checked overload for untyped input; throws DimensionError on size != 7.
std::vector<double> normalize_action(std::span<const double> value,
                                     const NormalizationStats& stats, Direction direction,
                                     std::size_t* clamped = nullptr);

}  // namespace interleaf

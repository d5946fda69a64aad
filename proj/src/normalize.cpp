#include "interleaf/normalize.hpp"

#include <algorithm>
#include <limits>

#include "interleaf/errors.hpp"

namespace interleaf {

NormalizationStats compute_norm_stats(std::span<const Episode> episodes, std::string label) {
  NormalizationStats s;
  s.dataset_label = std::move(label);
  s.min.fill(std::numeric_limits<double>::infinity());
  s.max.fill(-std::numeric_limits<double>::infinity());
  std::size_t frames = 0;
  for (const Episode& e : episodes) {
    for (const Frame& f : e.frames) {
      ++frames;
      for (std::size_t i = 0; i < kPoseDims; ++i) {
        s.min[i] = std::min({s.min[i], f.action[i], f.proprio[i]});
        s.max[i] = std::max({s.max[i], f.action[i], f.proprio[i]});
      }
    }
  }
  if (frames == 0) {
    throw ValidationError("cannot compute normalization stats over zero frames");
  }
  return s;
}

Pose7 normalize_action(const Pose7& value, const NormalizationStats& stats, Direction direction,
                       std::size_t* clamped) {
  Pose7 out{};
  for (std::size_t i = 0; i < kPoseDims; ++i) {
    const double lo = stats.min[i];
    const double hi = stats.max[i];
    const double range = hi - lo;
    if (direction == Direction::Forward) {
      const double v = std::clamp(value[i], lo, hi);
      if (clamped && v != value[i]) ++*clamped;
      out[i] = range > 0.0 ? std::clamp(2.0 * (v - lo) / range - 1.0, -1.0, 1.0) : 0.0;
    } else {
      const double v = std::clamp(value[i], -1.0, 1.0);
      if (clamped && v != value[i]) ++*clamped;
      out[i] = range > 0.0 ? std::clamp(lo + (v + 1.0) * 0.5 * range, lo, hi) : lo;
    }
  }
  return out;
}

std::vector<double> normalize_action(std::span<const double> value,
                                     const NormalizationStats& stats, Direction direction,
                                     std::size_t* clamped) {
  const Pose7 out = normalize_action(to_pose7(value, "action"), stats, direction, clamped);
  return {out.begin(), out.end()};
}

}  // namespace interleaf

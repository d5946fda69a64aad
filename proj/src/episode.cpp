#include "interleaf/episode.hpp"

#include <algorithm>
#include <string>

#include "interleaf/errors.hpp"

namespace interleaf {

Pose7 to_pose7(std::span<const double> values, std::string_view what) {
  if (values.size() != kPoseDims) {
    throw DimensionError(std::string(what) + " must have " + std::to_string(kPoseDims) +
                         " entries, got " + std::to_string(values.size()));
  }
  Pose7 out{};
  std::copy(values.begin(), values.end(), out.begin());
  return out;
}

void validate_episode(const Episode& episode) {
  if (episode.id.empty()) {
    throw ValidationError("episode id must be non-empty");
  }
  if (episode.frames.empty()) {
    throw ValidationError("episode '" + episode.id + "' has no frames");
  }
  for (std::size_t i = 0; i < episode.frames.size(); ++i) {
    const Frame& f = episode.frames[i];
    if (f.index < 0) {
      throw ValidationError("episode '" + episode.id + "': negative frame index");
    }
    if (i > 0 && f.index <= episode.frames[i - 1].index) {
      throw ValidationError("episode '" + episode.id + "': frame indices not strictly increasing at " +
                            std::to_string(f.index));
    }
    if (f.image_refs.empty()) {
      throw ValidationError("episode '" + episode.id + "': frame " + std::to_string(f.index) +
                            " has no image references");
    }
  }
}

}  // namespace interleaf

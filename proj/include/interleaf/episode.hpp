#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace interleaf {

inline constexpr std::size_t kPoseDims = 7;

/// xyz position (m), roll-pitch-yaw (rad), gripper state in [0, 1].
using Pose7 = std::array<double, kPoseDims>;

/// The one place where variable-length numeric data becomes a Pose7.
/// Throws DimensionError naming `what` when the size is not seven.
Pose7 to_pose7(std::span<const double> values, std::string_view what);

struct Frame {
  std::int64_t index = 0;
  std::vector<std::string> image_refs;
  Pose7 proprio{};
  Pose7 action{};

  bool operator==(const Frame&) const = default;
};

struct Episode {
  std::string id;
  std::string source_dataset;
  std::string instruction;
  std::vector<Frame> frames;
  std::map<std::string, std::string> meta;

  bool operator==(const Episode&) const = default;
};

/// Per-dimension min/max over one source dataset.
struct NormalizationStats {
  Pose7 min{};
  Pose7 max{};
  std::string dataset_label;

  bool operator==(const NormalizationStats&) const = default;
};

inline constexpr std::string_view kManifestFormatVersion = "1";
inline constexpr std::string_view kDefaultEulerConvention = "rpy-intrinsic-rad";

struct DatasetManifest {
  std::string version{kManifestFormatVersion};
  std::string euler_convention{kDefaultEulerConvention};
  /// Image directory, relative to the manifest file's directory.
  std::string image_root = ".";
  std::vector<Episode> episodes;
  std::optional<NormalizationStats> stats;

  /// Directory containing the manifest file; set by read_manifest.
  std::filesystem::path base_dir;

  std::filesystem::path resolve_image(const std::string& ref) const {
    return base_dir / image_root / ref;
  }

  bool operator==(const DatasetManifest& o) const {
    return version == o.version && euler_convention == o.euler_convention &&
           image_root == o.image_root && episodes == o.episodes && stats == o.stats;
  }
};

/// Checks per-episode invariants; throws ValidationError.
void validate_episode(const Episode& episode);

}  // namespace interleaf

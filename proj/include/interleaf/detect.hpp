#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "json.hpp"

#include "interleaf/backend.hpp"
#include "interleaf/episode.hpp"
#include "interleaf/geometry.hpp"

namespace interleaf {

enum class LocateMode { Dataset, FirstFrame };

std::string_view to_string(LocateMode mode);
LocateMode locate_mode_from_string(std::string_view s);

struct DetectionConfig {
  double score_threshold = 0.3;
  /// Dataset mode scans the first frame, then every `frame_stride`-th frame.
  int frame_stride = 10;
  int max_candidates = 8;
};

struct CropConfig {
  /// Expansion on each side, as a fraction of the box width/height.
  double pad_fraction = 0.1;
  int width = 224;
  int height = 224;
  /// Letterbox fill, RGB.
  std::array<std::uint8_t, 3> fill{128, 128, 128};
};

struct Detection {
  std::string phrase;
  std::int64_t frame_index = 0;
  /// Position of the frame inside Episode::frames.
  std::size_t frame_position = 0;
  BBox bbox;
  double score = 0.0;
  /// More than one box for the phrase was seen in some frame.
  bool multi_instance = false;
};

struct CropArtifact {
  std::string phrase;
  /// Content-addressed reference, relative to the crop store's root.
  std::string image_ref;
  /// Padded and clamped region of the source frame.
  BBox source_bbox;
  std::int64_t source_frame = 0;
  int width = 0;
  int height = 0;
  /// Decoded pixels; not serialized.
  cv::Mat pixels;
};

/// One entry in an object's audit trail. Service calls carry their latency.
struct StageRecord {
  std::string stage;
  std::string outcome;
  std::int64_t frame = -1;
  std::string note;
  std::int64_t elapsed_us = 0;
};
using Trail = std::vector<StageRecord>;

/// Loads frame pixels on demand. Must be safe for concurrent use.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Primary camera image for `episode.frames[position]`.
  virtual cv::Mat load(const Episode& episode, std::size_t position) = 0;
};

/// Reads frames from the image files referenced by a manifest.
class ManifestFrameSource : public FrameSource {
 public:
  explicit ManifestFrameSource(const DatasetManifest& manifest) : manifest_(manifest) {}
  cv::Mat load(const Episode& episode, std::size_t position) override;

 private:
  const DatasetManifest& manifest_;
};

/// Content-addressed PNG store. An empty root keeps crops in memory only.
class CropStore {
 public:
  explicit CropStore(std::filesystem::path root = {});
  /// Stores the image and returns its reference ("crops/<sha256>.png").
  std::string put(const cv::Mat& image);
  cv::Mat get(const std::string& ref) const;
  const std::filesystem::path& root() const { return root_; }
  std::size_t size() const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, cv::Mat> memory_;
  std::size_t written_ = 0;
};

/// Frame positions examined for a phrase.
std::vector<std::size_t> candidate_frames(std::size_t frame_count, LocateMode mode,
                                          const DetectionConfig& cfg);

/// Queries the detector on each candidate frame and returns the best
/// detection at or above threshold; ties prefer the smaller box, then the
/// earlier frame. Throws NotFound or StageUnavailable. Each detector call is
/// appended to `trail` when given.
Detection locate_object(const Episode& episode, std::string_view phrase, LocateMode mode,
                        const DetectionConfig& cfg, ModelBackend& backend, FrameSource& frames,
                        Trail* trail = nullptr);

/// Expands `bbox` by pad_fraction of its size on every side (outward to whole
/// pixels) and clamps it to the frame.
BBox pad_and_clamp(const BBox& bbox, double pad_fraction, int frame_width, int frame_height);

/// Aspect-preserving resize into a width x height canvas filled with `fill`.
cv::Mat letterbox(const cv::Mat& image, int width, int height,
                  const std::array<std::uint8_t, 3>& fill);

/// Pads, clamps, letterboxes and stores a crop. Throws ValidationError when
/// the clamped box is empty.
CropArtifact crop_region(const cv::Mat& frame, const BBox& bbox, const CropConfig& cfg,
                         CropStore& store, std::string_view phrase = {},
                         std::int64_t source_frame = 0);

nlohmann::ordered_json crop_to_json(const CropArtifact& crop);

}  // namespace interleaf

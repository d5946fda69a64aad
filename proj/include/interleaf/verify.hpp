#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "interleaf/backend.hpp"
#include "interleaf/detect.hpp"

namespace interleaf {

struct VerificationOutcome {
  bool match = false;
  double confidence = 0.0;
  /// Present only on mismatch; source-frame pixel coordinates.
  std::optional<std::vector<Point>> keypoints;
};

enum class ResolutionStatus { AcceptedDetector, AcceptedSegmenter, Rejected };

std::string_view to_string(ResolutionStatus s);
ResolutionStatus resolution_status_from_string(std::string_view s);

struct ObjectResolution {
  std::string phrase;
  ResolutionStatus status = ResolutionStatus::Rejected;
  /// Present iff status != Rejected.
  std::optional<CropArtifact> crop;
  Trail trail;
  bool multi_instance = false;
};

struct ResolveConfig {
  LocateMode mode = LocateMode::Dataset;
  DetectionConfig detection;
  CropConfig crop;
};

/// Sends the crop to the verifier. Keypoints outside the frame are dropped;
/// keypoints on a match are ignored.
VerificationOutcome verify_crop(const CropArtifact& crop, std::string_view phrase,
                                ModelBackend& backend, const RequestContext& context,
                                int frame_width, int frame_height, Trail* trail = nullptr);

/// Tight box of the mask the segmenter returns for the keypoints.
/// Throws ValidationError when no keypoint lies in the frame, SegmentEmpty on
/// an empty mask.
BBox segment_from_keypoints(const cv::Mat& frame, const std::vector<Point>& keypoints,
                            ModelBackend& backend, const RequestContext& context,
                            Trail* trail = nullptr);

/// Detector path first; on mismatch (or no detection) the verifier's
/// keypoints drive segmentation, re-crop and re-verification. Only
/// StageUnavailable escapes; every other failure ends as Rejected.
ObjectResolution resolve_object(const Episode& episode, std::string_view phrase,
                                const ResolveConfig& cfg, ModelBackend& backend,
                                FrameSource& frames, CropStore& store);

/// True when the first verification in the trail matched.
bool first_verify_matched(const Trail& trail);

/// Trail without timings, so serialized runs are reproducible.
nlohmann::ordered_json trail_to_json(const Trail& trail);
nlohmann::ordered_json resolution_to_json(const ObjectResolution& r);

}  // namespace interleaf

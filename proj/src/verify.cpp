#include "interleaf/verify.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

#include "interleaf/errors.hpp"

namespace interleaf {

std::string_view to_string(ResolutionStatus s) {
  switch (s) {
    case ResolutionStatus::AcceptedDetector: return "ACCEPTED_DETECTOR";
    case ResolutionStatus::AcceptedSegmenter: return "ACCEPTED_SEGMENTER";
    case ResolutionStatus::Rejected: return "REJECTED";
  }
  return "REJECTED";
}

ResolutionStatus resolution_status_from_string(std::string_view s) {
  if (s == "ACCEPTED_DETECTOR") return ResolutionStatus::AcceptedDetector;
  if (s == "ACCEPTED_SEGMENTER") return ResolutionStatus::AcceptedSegmenter;
  if (s == "REJECTED") return ResolutionStatus::Rejected;
  throw ValidationError("unknown resolution status '" + std::string(s) + "'");
}

namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() - t0).count();
}

}  // namespace

VerificationOutcome verify_crop(const CropArtifact& crop, std::string_view phrase,
                                ModelBackend& backend, const RequestContext& context,
                                int frame_width, int frame_height, Trail* trail) {
  VerifyRequest req;
  req.image = crop.pixels;
  req.phrase = std::string(phrase);
  req.context = context;
  req.context.frame = crop.source_frame;
  req.context.source_bbox = crop.source_bbox;

  const auto t0 = Clock::now();
  const VerifyResponse resp = backend.verify(req);
  const std::int64_t elapsed = micros_since(t0);

  VerificationOutcome out;
  out.match = resp.match;
  out.confidence = std::clamp(resp.confidence, 0.0, 1.0);
  if (!out.match && resp.keypoints) {
    std::vector<Point> inside;
    for (const Point& p : *resp.keypoints) {
      if (p.x >= 0 && p.y >= 0 && p.x < frame_width && p.y < frame_height) inside.push_back(p);
    }
    if (!inside.empty()) out.keypoints = std::move(inside);
  }
  if (trail) {
    std::string note = fmt::format("confidence={:.3f}", out.confidence);
    if (out.keypoints) note += fmt::format(" keypoints={}", out.keypoints->size());
    trail->push_back(
        {"verify", out.match ? "match" : "mismatch", crop.source_frame, std::move(note), elapsed});
  }
  return out;
}

BBox segment_from_keypoints(const cv::Mat& frame, const std::vector<Point>& keypoints,
                            ModelBackend& backend, const RequestContext& context, Trail* trail) {
  std::vector<Point> inside;
  for (const Point& p : keypoints) {
    if (p.x >= 0 && p.y >= 0 && p.x < frame.cols && p.y < frame.rows) inside.push_back(p);
  }
  if (inside.empty()) {
    throw ValidationError("segmentation needs at least one keypoint inside the frame");
  }
  SegmentRequest req;
  req.image = frame;
  req.keypoints = std::move(inside);
  req.context = context;

  const auto t0 = Clock::now();
  const SegmentResponse resp = backend.segment(req);
  const std::int64_t elapsed = micros_since(t0);

  std::optional<BBox> box;
  if (resp.bbox) {
    const BBox clamped = clamp_to_frame(*resp.bbox, frame.cols, frame.rows);
    if (clamped.valid()) box = clamped;
  }
  if (trail) {
    trail->push_back({"segment", box ? "mask" : "empty", context.frame.value_or(-1),
                      box ? "bbox=" + to_string(*box) : "", elapsed});
  }
  if (!box) {
    throw SegmentEmpty("segmenter returned an empty mask");
  }
  return *box;
}

ObjectResolution resolve_object(const Episode& episode, std::string_view phrase,
                                const ResolveConfig& cfg, ModelBackend& backend,
                                FrameSource& frames, CropStore& store) {
  ObjectResolution res;
  res.phrase = std::string(phrase);
  Trail& trail = res.trail;

  auto record_local = [&](std::string stage, std::string outcome, std::int64_t frame,
                          std::string note) {
    trail.push_back({std::move(stage), std::move(outcome), frame, std::move(note), 0});
  };
  auto reject = [&](std::string why) {
    record_local("resolve", "rejected", -1, std::move(why));
    res.status = ResolutionStatus::Rejected;
    res.crop.reset();
    return res;
  };

  std::size_t position = 0;
  std::optional<Detection> detection;
  try {
    detection = locate_object(episode, phrase, cfg.mode, cfg.detection, backend, frames, &trail);
    position = detection->frame_position;
    res.multi_instance = detection->multi_instance;
  } catch (const NotFound&) {
    position = 0;
  }

  const Frame& frame_meta = episode.frames[position];
  const cv::Mat frame = frames.load(episode, position);
  RequestContext ctx;
  ctx.episode_id = episode.id;
  ctx.frame = frame_meta.index;

  std::optional<std::vector<Point>> keypoints;
  try {
    // No detection: ask the verifier about the whole frame to obtain keypoints.
    const BBox first_box = detection ? detection->bbox : BBox{0, 0, frame.cols, frame.rows};
    CropArtifact crop =
        crop_region(frame, first_box, cfg.crop, store, phrase, frame_meta.index);
    record_local("crop", detection ? "detector" : "full-frame", frame_meta.index,
                 "bbox=" + to_string(crop.source_bbox));
    const VerificationOutcome v1 =
        verify_crop(crop, phrase, backend, ctx, frame.cols, frame.rows, &trail);
    if (v1.match && detection) {
      res.status = ResolutionStatus::AcceptedDetector;
      res.crop = std::move(crop);
      return res;
    }
    keypoints = v1.keypoints;
  } catch (const ValidationError& e) {
    return reject(e.what());
  }
  if (!keypoints) {
    return reject("verifier supplied no keypoints");
  }

  try {
    const BBox seg = segment_from_keypoints(frame, *keypoints, backend, ctx, &trail);
    CropArtifact crop = crop_region(frame, seg, cfg.crop, store, phrase, frame_meta.index);
    record_local("crop", "segmenter", frame_meta.index, "bbox=" + to_string(crop.source_bbox));
    const VerificationOutcome v2 =
        verify_crop(crop, phrase, backend, ctx, frame.cols, frame.rows, &trail);
    if (v2.match) {
      res.status = ResolutionStatus::AcceptedSegmenter;
      res.crop = std::move(crop);
      return res;
    }
    return reject("segmenter crop failed verification");
  } catch (const SegmentEmpty& e) {
    return reject(e.what());
  } catch (const ValidationError& e) {
    return reject(e.what());
  }
}

bool first_verify_matched(const Trail& trail) {
  for (const StageRecord& r : trail) {
    if (r.stage == "verify") return r.outcome == "match";
  }
  return false;
}

nlohmann::ordered_json trail_to_json(const Trail& trail) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const StageRecord& r : trail) {
    nlohmann::ordered_json j;
    j["stage"] = r.stage;
    j["outcome"] = r.outcome;
    if (r.frame >= 0) j["frame"] = r.frame;
    if (!r.note.empty()) j["note"] = r.note;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json resolution_to_json(const ObjectResolution& r) {
  nlohmann::ordered_json j;
  j["phrase"] = r.phrase;
  j["status"] = to_string(r.status);
  j["crop"] = r.crop ? crop_to_json(*r.crop) : nlohmann::ordered_json(nullptr);
  j["multi_instance"] = r.multi_instance;
  j["first_verify_match"] = first_verify_matched(r.trail);
  j["trail"] = trail_to_json(r.trail);
  return j;
}

}  // namespace interleaf

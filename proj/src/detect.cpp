#include "interleaf/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "interleaf/errors.hpp"
#include "interleaf/image_io.hpp"
#include "interleaf/io_util.hpp"

namespace fs = std::filesystem;

namespace interleaf {

std::string_view to_string(LocateMode mode) {
  return mode == LocateMode::Dataset ? "dataset" : "first-frame";
}

LocateMode locate_mode_from_string(std::string_view s) {
  if (s == "dataset") return LocateMode::Dataset;
  if (s == "first-frame") return LocateMode::FirstFrame;
  throw ValidationError("unknown mode '" + std::string(s) + "' (expected dataset|first-frame)");
}

cv::Mat ManifestFrameSource::load(const Episode& episode, std::size_t position) {
  const Frame& f = episode.frames.at(position);
  return load_image(manifest_.resolve_image(f.image_refs.front()));
}

CropStore::CropStore(fs::path root) : root_(std::move(root)) {
  if (!root_.empty()) fs::create_directories(root_ / "crops");
}

std::string CropStore::put(const cv::Mat& image) {
  const std::string png = encode_png(image);
  const std::string ref = "crops/" + sha256_hex(png) + ".png";
  if (root_.empty()) {
    std::lock_guard lock(mu_);
    memory_.try_emplace(ref, image.clone());
    return ref;
  }
  const fs::path path = root_ / ref;
  if (!fs::exists(path)) {
    atomic_write_file(path, png);
    std::lock_guard lock(mu_);
    ++written_;
  }
  return ref;
}

cv::Mat CropStore::get(const std::string& ref) const {
  if (root_.empty()) {
    std::lock_guard lock(mu_);
    auto it = memory_.find(ref);
    if (it == memory_.end()) throw IoError("unknown crop " + ref);
    return it->second;
  }
  return load_image(root_ / ref);
}

std::size_t CropStore::size() const {
  std::lock_guard lock(mu_);
  return root_.empty() ? memory_.size() : written_;
}

std::vector<std::size_t> candidate_frames(std::size_t frame_count, LocateMode mode,
                                          const DetectionConfig& cfg) {
  std::vector<std::size_t> out;
  if (frame_count == 0) return out;
  if (mode == LocateMode::FirstFrame) return {0};
  const std::size_t stride = static_cast<std::size_t>(std::max(1, cfg.frame_stride));
  const std::size_t cap = static_cast<std::size_t>(std::max(1, cfg.max_candidates));
  for (std::size_t p = 0; p < frame_count && out.size() < cap; p += stride) out.push_back(p);
  return out;
}

namespace {

bool better(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.bbox.area() != b.bbox.area()) return a.bbox.area() < b.bbox.area();
  return a.frame_index < b.frame_index;
}

std::int64_t micros_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() -
                                                               t0)
      .count();
}

}  // namespace

Detection locate_object(const Episode& episode, std::string_view phrase, LocateMode mode,
                        const DetectionConfig& cfg, ModelBackend& backend, FrameSource& frames,
                        Trail* trail) {
  if (episode.frames.empty()) {
    throw ValidationError("episode '" + episode.id + "' has no frames");
  }
  std::optional<Detection> best;
  bool multi = false;
  for (std::size_t pos : candidate_frames(episode.frames.size(), mode, cfg)) {
    const cv::Mat image = frames.load(episode, pos);
    DetectRequest req;
    req.image = image;
    req.phrases = {std::string(phrase)};
    req.context.episode_id = episode.id;
    req.context.frame = episode.frames[pos].index;

    const auto t0 = std::chrono::steady_clock::now();
    const DetectResponse resp = backend.detect(req);
    const std::int64_t elapsed = micros_since(t0);

    std::size_t hits = 0;
    double top = 0.0;
    for (const WireDetection& d : resp.detections) {
      if (d.phrase != phrase) continue;
      ++hits;
      const BBox box = clamp_to_frame(d.bbox, image.cols, image.rows);
      if (!box.valid() || d.score < cfg.score_threshold) continue;
      Detection cand{std::string(phrase), episode.frames[pos].index, pos, box,
                     std::clamp(d.score, 0.0, 1.0), false};
      top = std::max(top, cand.score);
      if (!best || better(cand, *best)) best = cand;
    }
    if (hits > 1) multi = true;
    if (trail) {
      trail->push_back({"detect", hits ? "boxes=" + std::to_string(hits) : "none",
                        episode.frames[pos].index,
                        hits ? fmt::format("top_score={:.3f}", top) : "",
                        elapsed});
    }
  }
  if (!best) {
    throw NotFound("no detection for '" + std::string(phrase) + "' at or above " +
                   std::to_string(cfg.score_threshold));
  }
  best->multi_instance = multi;
  return *best;
}

BBox pad_and_clamp(const BBox& bbox, double pad_fraction, int frame_width, int frame_height) {
  constexpr double kEps = 1e-9;
  const double px = pad_fraction * bbox.width();
  const double py = pad_fraction * bbox.height();
  const BBox padded{static_cast<int>(std::floor(bbox.x0 - px + kEps)),
                    static_cast<int>(std::floor(bbox.y0 - py + kEps)),
                    static_cast<int>(std::ceil(bbox.x1 + px - kEps)),
                    static_cast<int>(std::ceil(bbox.y1 + py - kEps))};
  return clamp_to_frame(padded, frame_width, frame_height);
}

cv::Mat letterbox(const cv::Mat& image, int width, int height,
                  const std::array<std::uint8_t, 3>& fill) {
  cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(fill[2], fill[1], fill[0]));
  const double scale = std::min(static_cast<double>(width) / image.cols,
                                static_cast<double>(height) / image.rows);
  const int w = std::clamp(static_cast<int>(std::lround(image.cols * scale)), 1, width);
  const int h = std::clamp(static_cast<int>(std::lround(image.rows * scale)), 1, height);
  cv::Mat resized;
  cv::resize(image, resized, cv::Size(w, h), 0, 0, scale < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
  resized.copyTo(canvas(cv::Rect((width - w) / 2, (height - h) / 2, w, h)));
  return canvas;
}

CropArtifact crop_region(const cv::Mat& frame, const BBox& bbox, const CropConfig& cfg,
                         CropStore& store, std::string_view phrase, std::int64_t source_frame) {
  if (cfg.width < 1 || cfg.height < 1) {
    throw ValidationError("crop resolution must be positive");
  }
  const BBox region = pad_and_clamp(bbox, cfg.pad_fraction, frame.cols, frame.rows);
  if (!region.valid()) {
    throw ValidationError("degenerate crop box " + to_string(bbox) + " after clamping");
  }
  const cv::Mat patch =
      frame(cv::Rect(region.x0, region.y0, region.width(), region.height()));
  CropArtifact out;
  out.phrase = std::string(phrase);
  out.pixels = letterbox(patch, cfg.width, cfg.height, cfg.fill);
  out.image_ref = store.put(out.pixels);
  out.source_bbox = region;
  out.source_frame = source_frame;
  out.width = cfg.width;
  out.height = cfg.height;
  return out;
}

nlohmann::ordered_json crop_to_json(const CropArtifact& crop) {
  nlohmann::ordered_json j;
  j["phrase"] = crop.phrase;
  j["image_ref"] = crop.image_ref;
  j["source_bbox"] = {crop.source_bbox.x0, crop.source_bbox.y0, crop.source_bbox.x1,
                      crop.source_bbox.y1};
  j["source_frame"] = crop.source_frame;
  j["resolution"] = {crop.width, crop.height};
  return j;
}

}  // namespace interleaf

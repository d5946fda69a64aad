#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "json.hpp"

#include "interleaf/geometry.hpp"

namespace interleaf {

// Wire protocol: every backend is a POST endpoint taking and returning a JSON
// body. Images travel as base64-encoded PNG. Requests must carry the
// protocol version header.
//
//   /v1/parse    {instruction}                 -> {objects, template}
//   /v1/detect   {image_b64, phrases}          -> {detections: [{phrase, bbox, score}]}
//   /v1/verify   {image_b64, phrase}           -> {match, confidence, keypoints?}
//   /v1/segment  {image_b64, keypoints}        -> {bbox}   (bbox null: empty mask)
//
// Every request may also carry an optional "context" object
// {episode_id, frame, source_bbox} describing where the image came from.
// Keypoints are in source-frame pixel coordinates.

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr const char* kProtocolHeader = "X-Interleaf-Protocol";

enum class RequestKind { Parse, Detect, Verify, Segment };

std::string_view to_string(RequestKind kind);
std::string_view endpoint_path(RequestKind kind);

struct RequestContext {
  std::string episode_id;
  std::optional<std::int64_t> frame;
  /// Region of the source frame the request image was cut from.
  std::optional<BBox> source_bbox;
};

struct ParseRequest {
  std::string instruction;
  RequestContext context;
};

struct ParseResponse {
  std::vector<std::string> objects;
  std::string template_text;
};

struct DetectRequest {
  cv::Mat image;
  std::vector<std::string> phrases;
  RequestContext context;
};

struct WireDetection {
  std::string phrase;
  BBox bbox;
  double score = 0.0;
};

struct DetectResponse {
  std::vector<WireDetection> detections;
};

struct VerifyRequest {
  cv::Mat image;
  std::string phrase;
  RequestContext context;
};

struct VerifyResponse {
  bool match = false;
  double confidence = 0.0;
  std::optional<std::vector<Point>> keypoints;
};

struct SegmentRequest {
  cv::Mat image;
  std::vector<Point> keypoints;
  RequestContext context;
};

struct SegmentResponse {
  std::optional<BBox> bbox;
};

/// The four model services behind one interface. Implementations must be
/// safe to call from several worker threads at once.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual ParseResponse parse(const ParseRequest& request) = 0;
  virtual DetectResponse detect(const DetectRequest& request) = 0;
  virtual VerifyResponse verify(const VerifyRequest& request) = 0;
  virtual SegmentResponse segment(const SegmentRequest& request) = 0;
};

// JSON mapping. from_json functions throw ProtocolError on schema violations.
nlohmann::json to_json(const ParseRequest& r);
nlohmann::json to_json(const DetectRequest& r);
nlohmann::json to_json(const VerifyRequest& r);
nlohmann::json to_json(const SegmentRequest& r);
nlohmann::json to_json(const ParseResponse& r);
nlohmann::json to_json(const DetectResponse& r);
nlohmann::json to_json(const VerifyResponse& r);
nlohmann::json to_json(const SegmentResponse& r);

ParseRequest parse_request_from_json(const nlohmann::json& j);
DetectRequest detect_request_from_json(const nlohmann::json& j);
VerifyRequest verify_request_from_json(const nlohmann::json& j);
SegmentRequest segment_request_from_json(const nlohmann::json& j);
ParseResponse parse_response_from_json(const nlohmann::json& j);
DetectResponse detect_response_from_json(const nlohmann::json& j);
VerifyResponse verify_response_from_json(const nlohmann::json& j);
SegmentResponse segment_response_from_json(const nlohmann::json& j);

nlohmann::json bbox_to_json(const BBox& b);
BBox bbox_from_json(const nlohmann::json& j);

}  // namespace interleaf

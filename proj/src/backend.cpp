#include "interleaf/backend.hpp"

#include <cmath>

#include "interleaf/errors.hpp"
#include "interleaf/image_io.hpp"

using nlohmann::json;

namespace interleaf {

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::Parse: return "parse";
    case RequestKind::Detect: return "detect";
    case RequestKind::Verify: return "verify";
    case RequestKind::Segment: return "segment";
  }
  return "unknown";
}

std::string_view endpoint_path(RequestKind kind) {
  switch (kind) {
    case RequestKind::Parse: return "/v1/parse";
    case RequestKind::Detect: return "/v1/detect";
    case RequestKind::Verify: return "/v1/verify";
    case RequestKind::Segment: return "/v1/segment";
  }
  return "";
}

namespace {

const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw ProtocolError("body must be a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ProtocolError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_field(const json& j, const char* key) {
  const json& v = field(j, key);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

cv::Mat image_field(const json& j) {
  return image_from_base64(string_field(j, "image_b64"));
}

double number(const json& v, const char* what) {
  if (!v.is_number()) throw ProtocolError(std::string(what) + " must be numeric");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProtocolError(std::string(what) + " must be finite");
  return d;
}

json points_to_json(const std::vector<Point>& pts) {
  json arr = json::array();
  for (const Point& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

std::vector<Point> points_from_json(const json& j) {
  if (!j.is_array()) throw ProtocolError("keypoints must be an array");
  std::vector<Point> pts;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) throw ProtocolError("keypoint must be [x, y]");
    pts.push_back({number(p[0], "keypoint"), number(p[1], "keypoint")});
  }
  return pts;
}

json context_to_json(const RequestContext& c) {
  json j = json::object();
  if (!c.episode_id.empty()) j["episode_id"] = c.episode_id;
  if (c.frame) j["frame"] = *c.frame;
  if (c.source_bbox) j["source_bbox"] = bbox_to_json(*c.source_bbox);
  return j;
}

RequestContext context_from_json(const json& body) {
  RequestContext c;
  auto it = body.find("context");
  if (it == body.end() || it->is_null()) return c;
  if (!it->is_object()) throw ProtocolError("context must be an object");
  if (auto e = it->find("episode_id"); e != it->end()) {
    if (!e->is_string()) throw ProtocolError("context.episode_id must be a string");
    c.episode_id = e->get<std::string>();
  }
  if (auto f = it->find("frame"); f != it->end()) {
    if (!f->is_number_integer()) throw ProtocolError("context.frame must be an integer");
    c.frame = f->get<std::int64_t>();
  }
  if (auto b = it->find("source_bbox"); b != it->end()) c.source_bbox = bbox_from_json(*b);
  return c;
}

void attach_context(json& j, const RequestContext& c) {
  json ctx = context_to_json(c);
  if (!ctx.empty()) j["context"] = std::move(ctx);
}

}  // namespace

json bbox_to_json(const BBox& b) { return json::array({b.x0, b.y0, b.x1, b.y1}); }

BBox bbox_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ProtocolError("bbox must be [x0, y0, x1, y1]");
  // Sub-pixel boxes from real services are expanded outward to whole pixels.
  return {static_cast<int>(std::floor(number(j[0], "bbox"))),
          static_cast<int>(std::floor(number(j[1], "bbox"))),
          static_cast<int>(std::ceil(number(j[2], "bbox"))),
          static_cast<int>(std::ceil(number(j[3], "bbox")))};
}

json to_json(const ParseRequest& r) {
  json j{{"instruction", r.instruction}};
  attach_context(j, r.context);
  return j;
}

json to_json(const DetectRequest& r) {
  json j{{"image_b64", image_to_base64(r.image)}, {"phrases", r.phrases}};
  attach_context(j, r.context);
  return j;
}

json to_json(const VerifyRequest& r) {
  json j{{"image_b64", image_to_base64(r.image)}, {"phrase", r.phrase}};
  attach_context(j, r.context);
  return j;
}

json to_json(const SegmentRequest& r) {
  json j{{"image_b64", image_to_base64(r.image)}, {"keypoints", points_to_json(r.keypoints)}};
  attach_context(j, r.context);
  return j;
}

json to_json(const ParseResponse& r) {
  return {{"objects", r.objects}, {"template", r.template_text}};
}

json to_json(const DetectResponse& r) {
  json dets = json::array();
  for (const auto& d : r.detections) {
    dets.push_back({{"phrase", d.phrase}, {"bbox", bbox_to_json(d.bbox)}, {"score", d.score}});
  }
  return {{"detections", std::move(dets)}};
}

json to_json(const VerifyResponse& r) {
  json j{{"match", r.match}, {"confidence", r.confidence}};
  if (r.keypoints) j["keypoints"] = points_to_json(*r.keypoints);
  return j;
}

json to_json(const SegmentResponse& r) {
  return {{"bbox", r.bbox ? bbox_to_json(*r.bbox) : json(nullptr)}};
}

ParseRequest parse_request_from_json(const json& j) {
  ParseRequest r;
  r.instruction = string_field(j, "instruction");
  r.context = context_from_json(j);
  return r;
}

DetectRequest detect_request_from_json(const json& j) {
  DetectRequest r;
  r.image = image_field(j);
  const json& phrases = field(j, "phrases");
  if (!phrases.is_array()) throw ProtocolError("phrases must be an array");
  for (const json& p : phrases) {
    if (!p.is_string()) throw ProtocolError("phrases must hold strings");
    r.phrases.push_back(p.get<std::string>());
  }
  r.context = context_from_json(j);
  return r;
}

VerifyRequest verify_request_from_json(const json& j) {
  VerifyRequest r;
  r.image = image_field(j);
  r.phrase = string_field(j, "phrase");
  r.context = context_from_json(j);
  return r;
}

SegmentRequest segment_request_from_json(const json& j) {
  SegmentRequest r;
  r.image = image_field(j);
  r.keypoints = points_from_json(field(j, "keypoints"));
  r.context = context_from_json(j);
  return r;
}

ParseResponse parse_response_from_json(const json& j) {
  ParseResponse r;
  const json& objs = field(j, "objects");
  if (!objs.is_array()) throw ProtocolError("objects must be an array");
  for (const json& o : objs) {
    if (!o.is_string()) throw ProtocolError("objects must hold strings");
    r.objects.push_back(o.get<std::string>());
  }
  r.template_text = string_field(j, "template");
  return r;
}

DetectResponse detect_response_from_json(const json& j) {
  DetectResponse r;
  const json& dets = field(j, "detections");
  if (!dets.is_array()) throw ProtocolError("detections must be an array");
  for (const json& d : dets) {
    WireDetection w;
    w.phrase = string_field(d, "phrase");
    w.bbox = bbox_from_json(field(d, "bbox"));
    w.score = number(field(d, "score"), "score");
    r.detections.push_back(std::move(w));
  }
  return r;
}

VerifyResponse verify_response_from_json(const json& j) {
  VerifyResponse r;
  const json& m = field(j, "match");
  if (!m.is_boolean()) throw ProtocolError("match must be a boolean");
  r.match = m.get<bool>();
  r.confidence = number(field(j, "confidence"), "confidence");
  if (auto it = j.find("keypoints"); it != j.end() && !it->is_null()) {
    r.keypoints = points_from_json(*it);
  }
  return r;
}

SegmentResponse segment_response_from_json(const json& j) {
  SegmentResponse r;
  const json& b = field(j, "bbox");
  if (!b.is_null()) r.bbox = bbox_from_json(b);
  return r;
}

}  // namespace interleaf

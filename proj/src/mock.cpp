#include "interleaf/mock.hpp"

#include <algorithm>
#include <cctype>

#include "interleaf/errors.hpp"
#include "interleaf/instruction.hpp"
#include "interleaf/rng.hpp"

namespace interleaf {

void MockBackendConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError(std::string(name) + " must be in [0, 1]");
    }
  };
  prob(p_detect_fail, "p_detect_fail");
  prob(p_verify_fail, "p_verify_fail");
  prob(correlation, "correlation");
  prob(detect_score, "detect_score");
  prob(distractor_score, "distractor_score");
  prob(occluded_score, "occluded_score");
  prob(match_iou, "match_iou");
}

double MockBackendConfig::correlation_for_joint(double p_detect, double p_verify, double joint) {
  const double indep = p_detect * p_verify;
  const double top = std::min(p_detect, p_verify);
  if (joint < indep || joint > top || top == indep) {
    throw ValidationError("joint failure rate not reachable by the correlation knob");
  }
  return (joint - indep) / (top - indep);
}

MockBackendConfig MockBackendConfig::preset(std::string_view name, std::uint64_t seed) {
  MockBackendConfig c;
  c.seed = seed;
  if (name == "error-free") return c;
  c.p_detect_fail = 0.174;
  c.p_verify_fail = 0.221;
  if (name == "independent") return c;
  if (name == "paper-calibrated") {
    c.correlation = correlation_for_joint(c.p_detect_fail, c.p_verify_fail, 0.044);
    return c;
  }
  if (name == "correlated") {
    c.correlation = 1.0;
    return c;
  }
  throw ValidationError("unknown mock preset '" + std::string(name) +
                        "' (expected error-free|independent|paper-calibrated|correlated)");
}

nlohmann::ordered_json MockBackendConfig::to_json() const {
  nlohmann::ordered_json j;
  j["p_detect_fail"] = p_detect_fail;
  j["p_verify_fail"] = p_verify_fail;
  j["correlation"] = correlation;
  j["seed"] = seed;
  j["detect_score"] = detect_score;
  j["distractor_score"] = distractor_score;
  j["occluded_score"] = occluded_score;
  j["match_iou"] = match_iou;
  return j;
}

FailureDraw draw_failures(const MockBackendConfig& cfg, std::string_view episode_id,
                          std::string_view phrase) {
  const std::uint64_t shared_key = rng::derive(cfg.seed, {"mock", episode_id, phrase, "shared"});
  const std::uint64_t detect_key = rng::derive(cfg.seed, {"mock", episode_id, phrase, "detect"});
  const std::uint64_t verify_key = rng::derive(cfg.seed, {"mock", episode_id, phrase, "verify"});

  const double u_shared = rng::unit(shared_key);
  const bool coupled = rng::unit(rng::splitmix64(shared_key)) < cfg.correlation;
  const double u_detect = coupled ? u_shared : rng::unit(detect_key);
  const double u_verify = coupled ? u_shared : rng::unit(verify_key);

  FailureDraw d;
  d.detect_fail = u_detect < cfg.p_detect_fail;
  d.verify_fail = u_verify < cfg.p_verify_fail;
  d.detect_distractor = rng::unit(rng::splitmix64(detect_key)) < 0.5;
  d.detect_pick = rng::splitmix64(detect_key ^ 0x9e3779b97f4a7c15ULL);
  d.verify_pick = rng::splitmix64(verify_key ^ 0x9e3779b97f4a7c15ULL);
  return d;
}

namespace {

const SceneObject* pick_distractor(const TruthIndex::EpisodeTruth& ep, const SceneObject& self,
                                   std::uint64_t pick) {
  std::vector<const SceneObject*> others;
  for (const auto& o : ep.objects) {
    if (o.role == ObjectRole::Distractor && o.category != self.category) others.push_back(&o);
  }
  if (others.empty()) return nullptr;
  return others[pick % others.size()];
}

std::string escape_braces(std::string_view s) {
  std::string out;
  for (char c : s) {
    out.push_back(c);
    if (c == '{' || c == '}') out.push_back(c);
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

ParseResponse mock_parse(const ParseRequest& req, const TruthIndex& truth, const MockBackendConfig&) {
  const std::string instruction = normalize_whitespace(req.instruction);
  const TruthIndex::EpisodeTruth* ep = truth.episode(req.context.episode_id);
  ParseResponse resp;
  if (!ep) {
    const ParsedInstruction p = extract_key_objects(instruction, Lexicon::builtin());
    resp.objects = p.phrases;
    resp.template_text = p.template_text;
    return resp;
  }
  // Locate every instruction object's phrase; emit them in textual order.
  const std::string hay = lower(instruction);
  std::vector<std::pair<std::size_t, std::string>> hits;
  for (const auto& o : ep->objects) {
    if (o.role == ObjectRole::Distractor) continue;
    const std::size_t at = hay.find(lower(o.phrase));
    if (at != std::string::npos) hits.emplace_back(at, instruction.substr(at, o.phrase.size()));
  }
  std::sort(hits.begin(), hits.end());
  std::size_t cursor = 0;
  for (const auto& [at, text] : hits) {
    if (at < cursor) continue;
    resp.template_text += escape_braces(std::string_view(instruction).substr(cursor, at - cursor));
    resp.template_text += "{" + std::to_string(resp.objects.size()) + "}";
    resp.objects.push_back(text);
    cursor = at + text.size();
  }
  resp.template_text += escape_braces(std::string_view(instruction).substr(cursor));
  return resp;
}

DetectResponse mock_detect(const DetectRequest& req, const TruthIndex& truth,
                           const MockBackendConfig& cfg) {
  DetectResponse resp;
  const TruthIndex::EpisodeTruth* ep = truth.episode(req.context.episode_id);
  if (!ep) return resp;
  const std::int64_t frame = req.context.frame.value_or(0);
  const std::optional<BBox> arm = truth.arm(req.context.episode_id, frame);
  for (const std::string& phrase : req.phrases) {
    const SceneObject* obj = truth.object(req.context.episode_id, phrase);
    if (!obj) continue;
    const FailureDraw d = draw_failures(cfg, req.context.episode_id, phrase);
    if (d.detect_fail) {
      if (!d.detect_distractor) continue;
      if (const SceneObject* other = pick_distractor(*ep, *obj, d.detect_pick)) {
        resp.detections.push_back({phrase, other->bbox, cfg.distractor_score});
      }
      continue;
    }
    const bool occluded = arm && intersect(*arm, obj->bbox).valid();
    resp.detections.push_back({phrase, obj->bbox, occluded ? cfg.occluded_score : cfg.detect_score});
  }
  return resp;
}

VerifyResponse mock_verify(const VerifyRequest& req, const TruthIndex& truth,
                           const MockBackendConfig& cfg) {
  if (!req.context.source_bbox) {
    throw ProtocolError("mock verifier needs context.source_bbox");
  }
  VerifyResponse resp;
  const TruthIndex::EpisodeTruth* ep = truth.episode(req.context.episode_id);
  const SceneObject* obj = truth.object(req.context.episode_id, req.phrase);
  if (!ep || !obj) return resp;
  const double overlap = iou(*req.context.source_bbox, obj->bbox);
  resp.confidence = overlap;
  resp.match = overlap >= cfg.match_iou;
  if (resp.match) return resp;

  const FailureDraw d = draw_failures(cfg, req.context.episode_id, req.phrase);
  const SceneObject* target = obj;
  if (d.verify_fail) target = pick_distractor(*ep, *obj, d.verify_pick);
  if (target) resp.keypoints = std::vector<Point>{target->centroid};
  return resp;
}

SegmentResponse mock_segment(const SegmentRequest& req, const TruthIndex& truth,
                             const MockBackendConfig&) {
  SegmentResponse resp;
  const TruthIndex::EpisodeTruth* ep = truth.episode(req.context.episode_id);
  if (!ep || req.keypoints.empty()) return resp;
  const Point& p = req.keypoints.front();
  for (const auto& o : ep->objects) {
    if (o.bbox.contains(p.x, p.y)) {
      resp.bbox = o.bbox;
      break;
    }
  }
  return resp;
}

nlohmann::json mock_infer(RequestKind kind, const nlohmann::json& request, const TruthIndex& truth,
                          const MockBackendConfig& cfg) {
  switch (kind) {
    case RequestKind::Parse:
      return to_json(mock_parse(parse_request_from_json(request), truth, cfg));
    case RequestKind::Detect:
      return to_json(mock_detect(detect_request_from_json(request), truth, cfg));
    case RequestKind::Verify:
      return to_json(mock_verify(verify_request_from_json(request), truth, cfg));
    case RequestKind::Segment:
      return to_json(mock_segment(segment_request_from_json(request), truth, cfg));
  }
  throw ProtocolError("unknown request kind");
}

MockBackend::MockBackend(const TruthIndex& truth, MockBackendConfig cfg)
    : truth_(truth), cfg_(std::move(cfg)) {
  cfg_.validate();
}

ParseResponse MockBackend::parse(const ParseRequest& r) { return mock_parse(r, truth_, cfg_); }
DetectResponse MockBackend::detect(const DetectRequest& r) { return mock_detect(r, truth_, cfg_); }
VerifyResponse MockBackend::verify(const VerifyRequest& r) { return mock_verify(r, truth_, cfg_); }
SegmentResponse MockBackend::segment(const SegmentRequest& r) { return mock_segment(r, truth_, cfg_); }

}  // namespace interleaf

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "json.hpp"

#include "interleaf/backend.hpp"
#include "interleaf/synthetic.hpp"

namespace interleaf {

// Seeded stand-ins for the four model services, answering from the
// synthetic world's ground truth. Every response is a pure function of
// (seed, episode id, phrase, request kind) and the request itself.

struct MockBackendConfig {
  /// Detector returns a distractor's box or nothing for the object.
  double p_detect_fail = 0.0;
  /// Verifier points at a distractor instead of the object.
  double p_verify_fail = 0.0;
  /// Probability that both failure draws share one uniform. 0 gives
  /// independent failures, 1 gives P(both) = min(p_detect_fail, p_verify_fail).
  double correlation = 0.0;
  std::uint64_t seed = 0;

  double detect_score = 0.9;
  double distractor_score = 0.6;
  /// Score when the arm overlaps the object in the requested frame.
  double occluded_score = 0.45;
  double match_iou = 0.5;

  void validate() const;

  /// "error-free", "independent" (0.174 / 0.221, c = 0),
  /// "paper-calibrated" (same rates, c chosen so P(both) = 0.044),
  /// "correlated" (same rates, c = 1).
  static MockBackendConfig preset(std::string_view name, std::uint64_t seed = 0);
  /// Correlation that makes P(both fail) equal `joint` for the given rates.
  static double correlation_for_joint(double p_detect, double p_verify, double joint);

  nlohmann::ordered_json to_json() const;
};

struct FailureDraw {
  bool detect_fail = false;
  bool verify_fail = false;
  /// On detector failure: true = distractor box, false = nothing.
  bool detect_distractor = false;
  /// Independent uniforms used to pick which distractor.
  std::uint64_t detect_pick = 0;
  std::uint64_t verify_pick = 0;
};

FailureDraw draw_failures(const MockBackendConfig& cfg, std::string_view episode_id,
                          std::string_view phrase);

ParseResponse mock_parse(const ParseRequest& req, const TruthIndex& truth, const MockBackendConfig& cfg);
DetectResponse mock_detect(const DetectRequest& req, const TruthIndex& truth, const MockBackendConfig& cfg);
VerifyResponse mock_verify(const VerifyRequest& req, const TruthIndex& truth, const MockBackendConfig& cfg);
SegmentResponse mock_segment(const SegmentRequest& req, const TruthIndex& truth,
                             const MockBackendConfig& cfg);

/// Wire-level entry point: decodes the request body, answers, encodes the
/// response. Throws ProtocolError on a malformed request.
nlohmann::json mock_infer(RequestKind kind, const nlohmann::json& request, const TruthIndex& truth,
                          const MockBackendConfig& cfg);

/// In-process backend; requests never leave the address space.
class MockBackend : public ModelBackend {
 public:
  MockBackend(const TruthIndex& truth, MockBackendConfig cfg);

  ParseResponse parse(const ParseRequest& request) override;
  DetectResponse detect(const DetectRequest& request) override;
  VerifyResponse verify(const VerifyRequest& request) override;
  SegmentResponse segment(const SegmentRequest& request) override;

  const MockBackendConfig& config() const { return cfg_; }

 private:
  const TruthIndex& truth_;
  MockBackendConfig cfg_;
};

}  // namespace interleaf

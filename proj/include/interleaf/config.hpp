#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "interleaf/augment.hpp"
#include "interleaf/detect.hpp"
#include "interleaf/http_backend.hpp"
#include "interleaf/interleave.hpp"
#include "interleaf/mock.hpp"

namespace interleaf {

enum class FailurePolicy { KeepTextOnly, Drop };

std::string_view to_string(FailurePolicy p);
FailurePolicy failure_policy_from_string(std::string_view s);

enum class ParserChoice {
  /// Rule grammar; instructions it cannot take go to the parse service.
  Auto,
  Rule,
  Service
};

std::string_view to_string(ParserChoice p);
ParserChoice parser_choice_from_string(std::string_view s);

/// Environment variables starting with this prefix override config keys;
/// "__" separates nesting levels (INTERLEAF_DETECTION__SCORE_THRESHOLD).
inline constexpr std::string_view kEnvPrefix = "INTERLEAF_";

struct PipelineConfig {
  Endpoints endpoints;
  ClientConfig client;
  /// Use in-process mock backends instead of the endpoints.
  bool mock_in_process = false;
  MockBackendConfig mock;
  /// Ground-truth sidecar for the mocks; defaults to truth.jsonl next to the
  /// input manifest.
  std::string truth;

  DetectionConfig detection;
  CropConfig crop;
  TokenizerConfig tokenizer;
  AugmentPolicy augment;
  /// Web image pool directory; empty disables web images.
  std::string pool_root;
  /// Optional lexicon file replacing the bundled one.
  std::string lexicon;
  ParserChoice parser = ParserChoice::Auto;

  int workers = 1;
  std::uint64_t seed = 0;
  LocateMode mode = LocateMode::Dataset;
  FailurePolicy failure_policy = FailurePolicy::KeepTextOnly;
  bool normalize_actions = true;

  /// Throws ValidationError when an invariant fails.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  /// Strict: unknown keys are rejected. Missing keys keep their defaults.
  static PipelineConfig from_json(const nlohmann::json& j);

  /// Digest of everything that can change the output (workers and client
  /// tuning excluded), so a resumed run can tell it matches.
  std::string digest() const;
};

/// Removes the keys that tune execution but never change output
/// (workers, client). Works on any config-shaped document.
template <class Json>
void strip_execution_keys(Json& j) {
  if (!j.is_object()) return;
  j.erase("workers");
  j.erase("client");
}

/// Applies KEY=VALUE overrides (already stripped of the prefix, lowercase,
/// "__"-separated) to a config document. Values parse as JSON when they can,
/// else as strings.
void apply_overrides(nlohmann::json& doc, const std::map<std::string, std::string>& overrides);

/// Overrides taken from the process environment.
std::map<std::string, std::string> env_overrides(std::string_view prefix = kEnvPrefix);

/// Defaults <- file (if given) <- environment, then validated.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::map<std::string, std::string>& overrides = env_overrides());

}  // namespace interleaf

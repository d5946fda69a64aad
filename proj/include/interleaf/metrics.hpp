#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "interleaf/verify.hpp"

namespace interleaf {

enum class EpisodeStatus { Success, Failure };

std::string_view to_string(EpisodeStatus s);
EpisodeStatus episode_status_from_string(std::string_view s);

/// SUCCESS iff no resolution is REJECTED. An empty list is SUCCESS; callers
/// count zero-object episodes separately.
EpisodeStatus episode_status(std::span<const ObjectResolution> resolutions);

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Exact binomial interval for x successes in n trials at the given
/// confidence. n = 0 yields [0, 1].
Interval clopper_pearson(std::uint64_t x, std::uint64_t n, double confidence = 0.95);

struct Ratio {
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  double rate() const { return total ? static_cast<double>(hits) / total : 0.0; }
};

/// What the report needs from one serialized episode record.
struct EpisodeSummary {
  std::string episode_id;
  EpisodeStatus status = EpisodeStatus::Success;
  bool zero_object = false;
  std::vector<ResolutionStatus> statuses;
  std::vector<bool> first_verify_match;
  std::vector<bool> multi_instance;
  /// Action/proprio entries clamped during normalization.
  std::uint64_t normalization_clamped = 0;
  /// (stage, outcome) for every trail record of every object.
  std::vector<std::pair<std::string, std::string>> trail;

  /// Throws ValidationError when required fields are missing.
  static EpisodeSummary from_json(const nlohmann::json& j);
};

struct StageTiming {
  std::uint64_t calls = 0;
  std::int64_t total_us = 0;
};

struct PipelineReport {
  static constexpr const char* kVersion = "1";

  std::uint64_t episodes_processed = 0;
  std::uint64_t episodes_success = 0;
  std::uint64_t episodes_failure = 0;
  std::uint64_t episodes_zero_object = 0;
  std::uint64_t episodes_aborted_pending = 0;

  std::uint64_t accepted_detector = 0;
  std::uint64_t accepted_segmenter = 0;
  std::uint64_t rejected = 0;

  /// Objects whose first verification matched.
  Ratio detector_only;
  /// Objects not REJECTED.
  Ratio combined;
  /// Keys: "detect" (calls / misses), "verify" (calls / mismatches),
  /// "segment" (calls / empty masks), "fallback" (attempts / rejections).
  std::map<std::string, Ratio> stage_errors;
  /// Objects whose phrase matched more than one box in some frame.
  std::uint64_t multi_instance_objects = 0;
  std::uint64_t normalization_clamped = 0;

  std::vector<std::string> corrupt_files;
  nlohmann::json config = nullptr;
  std::string config_digest;

  // Nondeterministic; kept out of to_json() unless asked for.
  double wall_clock_s = 0.0;
  std::map<std::string, StageTiming> stage_timings;

  std::uint64_t objects() const { return accepted_detector + accepted_segmenter + rejected; }
  std::uint64_t episodes_total() const { return episodes_processed + episodes_aborted_pending; }

  void add(const EpisodeSummary& e);
  /// Associative, commutative on counts; corrupt lists are kept sorted.
  void merge(const PipelineReport& other);

  nlohmann::ordered_json to_json(bool include_timings = false) const;
  static PipelineReport from_json(const nlohmann::json& j);
  std::string to_text() const;

  bool operator==(const PipelineReport& o) const;
};

/// Folds every episodes/*.json under `run_dir`. Unparseable files are listed
/// in corrupt_files. Reads run_config.json, when present, for the config
/// snapshot and the input episode count.
PipelineReport aggregate_report(const std::filesystem::path& run_dir);

struct AuditSample {
  std::vector<std::string> episode_ids;
  /// true = failure (some key object not detected).
  std::vector<bool> failed;
  std::uint64_t failures = 0;
  double estimate = 0.0;
  Interval interval;
  std::uint64_t population = 0;
  std::uint64_t seed = 0;

  nlohmann::ordered_json to_json() const;
};

/// Uniform sample of n episodes without replacement. Throws ValidationError
/// when n is 0 or exceeds the population.
AuditSample sample_audit(std::span<const std::pair<std::string, bool>> population, std::size_t n,
                         std::uint64_t seed);
AuditSample sample_audit(const std::filesystem::path& run_dir, std::size_t n, std::uint64_t seed);

}  // namespace interleaf

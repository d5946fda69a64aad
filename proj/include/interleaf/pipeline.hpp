#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "interleaf/augment.hpp"
#include "interleaf/config.hpp"
#include "interleaf/detect.hpp"
#include "interleaf/episode.hpp"
#include "interleaf/metrics.hpp"

namespace interleaf {

/// Library version, also stamped into every record's provenance.
std::string_view tool_version();

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitBackendUnavailable = 3,
  kExitResumable = 4,
};

// Output tree of a convert run:
//   run_config.json      config snapshot, digest, input summary
//   journal.log          one line per finished episode (resume checkpoint)
//   episodes/<id>.json   per-episode record, resolutions and trails
//   crops/<sha256>.png   content-addressed object crops
//   web/<sha256>.png     web images used, copied in by content
//   records.jsonl        emitted records in input order (complete runs only)
//   report.json/.txt     aggregate report, written last
//   timings.json         wall-clock and per-stage latency (not reproducible)

struct RunOptions {
  /// Replaces the backend the config would build (tests).
  ModelBackend* backend = nullptr;
  /// Replaces the manifest's image files as the frame source (tests).
  FrameSource* frames = nullptr;
  /// Called after each finished episode with (done, total).
  std::function<void(std::size_t, std::size_t)> progress;
};

struct RunResult {
  PipelineReport report;
  int exit_code = kExitOk;
  std::size_t processed_this_run = 0;
  std::size_t skipped_from_journal = 0;
  std::string abort_reason;
};

/// Builds the interleaved record for one episode. Exposed for tests; the
/// returned JSON is the episodes/<id>.json document.
struct EpisodeContext {
  const PipelineConfig* config = nullptr;
  const Lexicon* lexicon = nullptr;
  ModelBackend* backend = nullptr;
  FrameSource* frames = nullptr;
  CropStore* crops = nullptr;
  const WebImagePool* pool = nullptr;
  /// Directory web images are copied into ("" keeps the pool reference).
  std::filesystem::path web_dir;
  /// Per source dataset.
  const std::map<std::string, NormalizationStats>* stats = nullptr;
  std::string config_digest;
};

nlohmann::ordered_json process_episode(const Episode& episode, const EpisodeContext& ctx,
                                       Trail* timings = nullptr);

/// Converts every episode of the input manifest. Resumes from journal.log
/// when the output directory holds an unfinished run with the same config
/// digest. Throws ValidationError on bad config/input.
RunResult run_convert(const PipelineConfig& config, const std::filesystem::path& input_manifest,
                      const std::filesystem::path& out_dir, const RunOptions& options = {});

/// Ids recorded as finished in a journal, in journal order.
std::vector<std::string> read_journal(const std::filesystem::path& journal,
                                      std::string* digest = nullptr);

}  // namespace interleaf

#include "interleaf/metrics.hpp"

#include <algorithm>
#include <future>
#include <numeric>
#include <thread>

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include "interleaf/config.hpp"
#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/rng.hpp"

namespace fs = std::filesystem;

namespace interleaf {

std::string_view to_string(EpisodeStatus s) {
  return s == EpisodeStatus::Success ? "SUCCESS" : "FAILURE";
}

EpisodeStatus episode_status_from_string(std::string_view s) {
  if (s == "SUCCESS") return EpisodeStatus::Success;
  if (s == "FAILURE") return EpisodeStatus::Failure;
  throw ValidationError("unknown episode status '" + std::string(s) + "'");
}

EpisodeStatus episode_status(std::span<const ObjectResolution> resolutions) {
  for (const auto& r : resolutions) {
    if (r.status == ResolutionStatus::Rejected) return EpisodeStatus::Failure;
  }
  return EpisodeStatus::Success;
}

Interval clopper_pearson(std::uint64_t x, std::uint64_t n, double confidence) {
  if (x > n) throw ValidationError("successes exceed trials");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ValidationError("confidence must be in (0, 1)");
  }
  if (n == 0) return {0.0, 1.0};
  const double alpha = 1.0 - confidence;
  const auto xd = static_cast<double>(x);
  const auto nd = static_cast<double>(n);
  Interval out;
  out.lo = x == 0 ? 0.0 : boost::math::ibeta_inv(xd, nd - xd + 1.0, alpha / 2.0);
  out.hi = x == n ? 1.0 : boost::math::ibeta_inv(xd + 1.0, nd - xd, 1.0 - alpha / 2.0);
  return out;
}

EpisodeSummary EpisodeSummary::from_json(const nlohmann::json& j) {
  try {
    EpisodeSummary s;
    s.episode_id = j.at("episode_id").get<std::string>();
    s.status = episode_status_from_string(j.at("status").get<std::string>());
    s.zero_object = j.value("zero_object", false);
    s.normalization_clamped = j.value("normalization_clamped", std::uint64_t{0});
    for (const auto& r : j.at("resolutions")) {
      s.statuses.push_back(resolution_status_from_string(r.at("status").get<std::string>()));
      s.first_verify_match.push_back(r.at("first_verify_match").get<bool>());
      s.multi_instance.push_back(r.value("multi_instance", false));
      for (const auto& t : r.at("trail")) {
        s.trail.emplace_back(t.at("stage").get<std::string>(), t.at("outcome").get<std::string>());
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed episode record: ") + e.what());
  }
}

void PipelineReport::add(const EpisodeSummary& e) {
  ++episodes_processed;
  if (e.status == EpisodeStatus::Success) {
    ++episodes_success;
  } else {
    ++episodes_failure;
  }
  if (e.zero_object) ++episodes_zero_object;
  normalization_clamped += e.normalization_clamped;
  for (std::size_t i = 0; i < e.statuses.size(); ++i) {
    const ResolutionStatus st = e.statuses[i];
    switch (st) {
      case ResolutionStatus::AcceptedDetector: ++accepted_detector; break;
      case ResolutionStatus::AcceptedSegmenter: ++accepted_segmenter; break;
      case ResolutionStatus::Rejected: ++rejected; break;
    }
    if (e.multi_instance[i]) ++multi_instance_objects;
    ++detector_only.total;
    if (e.first_verify_match[i]) ++detector_only.hits;
    ++combined.total;
    if (st != ResolutionStatus::Rejected) ++combined.hits;
    if (!e.first_verify_match[i]) {
      Ratio& fb = stage_errors["fallback"];
      ++fb.total;
      if (st == ResolutionStatus::Rejected) ++fb.hits;
    }
  }
  for (const auto& [stage, outcome] : e.trail) {
    if (stage == "detect") {
      Ratio& r = stage_errors["detect"];
      ++r.total;
      if (outcome == "none") ++r.hits;
    } else if (stage == "verify") {
      Ratio& r = stage_errors["verify"];
      ++r.total;
      if (outcome != "match") ++r.hits;
    } else if (stage == "segment") {
      Ratio& r = stage_errors["segment"];
      ++r.total;
      if (outcome != "mask") ++r.hits;
    }
  }
}

void PipelineReport::merge(const PipelineReport& o) {
  episodes_processed += o.episodes_processed;
  episodes_success += o.episodes_success;
  episodes_failure += o.episodes_failure;
  episodes_zero_object += o.episodes_zero_object;
  episodes_aborted_pending += o.episodes_aborted_pending;
  accepted_detector += o.accepted_detector;
  accepted_segmenter += o.accepted_segmenter;
  rejected += o.rejected;
  multi_instance_objects += o.multi_instance_objects;
  normalization_clamped += o.normalization_clamped;
  detector_only.hits += o.detector_only.hits;
  detector_only.total += o.detector_only.total;
  combined.hits += o.combined.hits;
  combined.total += o.combined.total;
  for (const auto& [k, r] : o.stage_errors) {
    stage_errors[k].hits += r.hits;
    stage_errors[k].total += r.total;
  }
  corrupt_files.insert(corrupt_files.end(), o.corrupt_files.begin(), o.corrupt_files.end());
  std::sort(corrupt_files.begin(), corrupt_files.end());
  if (config.is_null()) {
    config = o.config;
    config_digest = o.config_digest;
  }
  wall_clock_s += o.wall_clock_s;
  for (const auto& [k, t] : o.stage_timings) {
    stage_timings[k].calls += t.calls;
    stage_timings[k].total_us += t.total_us;
  }
}

bool PipelineReport::operator==(const PipelineReport& o) const {
  return to_json(true).dump() == o.to_json(true).dump();
}

namespace {

nlohmann::ordered_json ratio_json(const Ratio& r, const char* hit_name) {
  nlohmann::ordered_json j;
  j[hit_name] = r.hits;
  j["total"] = r.total;
  j["rate"] = r.rate();
  return j;
}

Ratio ratio_from(const nlohmann::json& j, const char* hit_name) {
  return {j.at(hit_name).get<std::uint64_t>(), j.at("total").get<std::uint64_t>()};
}

}  // namespace

nlohmann::ordered_json PipelineReport::to_json(bool include_timings) const {
  nlohmann::ordered_json j;
  j["report_version"] = kVersion;
  j["episodes"] = {{"processed", episodes_processed},
                   {"success", episodes_success},
                   {"failure", episodes_failure},
                   {"zero_object", episodes_zero_object},
                   {"aborted_pending", episodes_aborted_pending},
                   {"total", episodes_total()}};
  j["objects"] = {{"total", objects()},
                  {"ACCEPTED_DETECTOR", accepted_detector},
                  {"ACCEPTED_SEGMENTER", accepted_segmenter},
                  {"REJECTED", rejected}};
  j["multi_instance_objects"] = multi_instance_objects;
  j["detector_only"] = ratio_json(detector_only, "correct");
  j["combined"] = ratio_json(combined, "correct");
  nlohmann::ordered_json stages = nlohmann::ordered_json::object();
  for (const auto& [k, r] : stage_errors) stages[k] = ratio_json(r, "errors");
  j["stage_errors"] = stages;
  j["normalization"] = {{"statistic", "min-max per source dataset"},
                        {"scope", "actions and proprio"},
                        {"clamped_values", normalization_clamped}};
  j["conventions"] = {
      {"detector_only", "first verification of the detector crop matched"},
      {"combined", "object not REJECTED after the segmenter fallback"},
      {"verifier_match", "mock verifier: IoU >= 0.5 between crop region and ground truth"}};
  j["corrupt_files"] = corrupt_files;
  j["config_digest"] = config_digest;
  j["config"] = config;
  if (include_timings) {
    j["wall_clock_s"] = wall_clock_s;
    nlohmann::ordered_json t = nlohmann::ordered_json::object();
    for (const auto& [k, s] : stage_timings) t[k] = {{"calls", s.calls}, {"total_us", s.total_us}};
    j["stage_timings"] = t;
  }
  return j;
}

PipelineReport PipelineReport::from_json(const nlohmann::json& j) {
  try {
    PipelineReport r;
    const auto& e = j.at("episodes");
    r.episodes_processed = e.at("processed");
    r.episodes_success = e.at("success");
    r.episodes_failure = e.at("failure");
    r.episodes_zero_object = e.at("zero_object");
    r.episodes_aborted_pending = e.at("aborted_pending");
    const auto& o = j.at("objects");
    r.accepted_detector = o.at("ACCEPTED_DETECTOR");
    r.accepted_segmenter = o.at("ACCEPTED_SEGMENTER");
    r.rejected = o.at("REJECTED");
    r.multi_instance_objects = j.value("multi_instance_objects", std::uint64_t{0});
    if (j.contains("normalization")) {
      r.normalization_clamped = j["normalization"].value("clamped_values", std::uint64_t{0});
    }
    r.detector_only = ratio_from(j.at("detector_only"), "correct");
    r.combined = ratio_from(j.at("combined"), "correct");
    for (const auto& [k, v] : j.at("stage_errors").items()) r.stage_errors[k] = ratio_from(v, "errors");
    r.corrupt_files = j.at("corrupt_files").get<std::vector<std::string>>();
    r.config_digest = j.value("config_digest", "");
    r.config = j.value("config", nlohmann::json(nullptr));
    r.wall_clock_s = j.value("wall_clock_s", 0.0);
    if (j.contains("stage_timings")) {
      for (const auto& [k, v] : j["stage_timings"].items()) {
        r.stage_timings[k] = {v.at("calls").get<std::uint64_t>(), v.at("total_us").get<std::int64_t>()};
      }
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed report: ") + e.what());
  }
}

std::string PipelineReport::to_text() const {
  auto pct = [](const Ratio& r) { return 100.0 * r.rate(); };
  std::string out;
  out += fmt::format("episodes: {} processed, {} success, {} failure, {} zero-object, {} pending\n",
                     episodes_processed, episodes_success, episodes_failure, episodes_zero_object,
                     episodes_aborted_pending);
  out += fmt::format("objects: {} total, {} detector, {} segmenter, {} rejected\n", objects(),
                     accepted_detector, accepted_segmenter, rejected);
  out += fmt::format("detector-only accuracy: {:.2f}% ({}/{})\n", pct(detector_only),
                     detector_only.hits, detector_only.total);
  out += fmt::format("combined accuracy:      {:.2f}% ({}/{})\n", pct(combined), combined.hits,
                     combined.total);
  if (multi_instance_objects) {
    out += fmt::format("multi-instance objects: {}\n", multi_instance_objects);
  }
  if (normalization_clamped) {
    out += fmt::format("normalization clamped {} values\n", normalization_clamped);
  }
  for (const auto& [k, r] : stage_errors) {
    out += fmt::format("  {:<9} error {:.2f}% ({}/{})\n", k, pct(r), r.hits, r.total);
  }
  if (!corrupt_files.empty()) {
    out += fmt::format("corrupt episode files: {}\n", corrupt_files.size());
    for (const auto& f : corrupt_files) out += "  " + f + "\n";
  }
  if (!config_digest.empty()) out += "config digest: " + config_digest + "\n";
  return out;
}

namespace {

std::vector<fs::path> episode_files(const fs::path& run_dir) {
  std::vector<fs::path> files;
  const fs::path dir = run_dir / "episodes";
  if (!fs::is_directory(dir)) return files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

PipelineReport fold_files(std::span<const fs::path> files) {
  PipelineReport r;
  for (const auto& f : files) {
    try {
      r.add(EpisodeSummary::from_json(nlohmann::json::parse(read_file(f))));
    } catch (const std::exception&) {
      r.corrupt_files.push_back(f.filename().string());
    }
  }
  return r;
}

}  // namespace

PipelineReport aggregate_report(const fs::path& run_dir) {
  const std::vector<fs::path> files = episode_files(run_dir);
  const std::size_t shards =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  const std::size_t chunk = std::max<std::size_t>(64, (files.size() + shards - 1) / shards);
  std::vector<std::future<PipelineReport>> parts;
  for (std::size_t start = 0; start < files.size(); start += chunk) {
    const std::span<const fs::path> slice(files.data() + start,
                                          std::min(chunk, files.size() - start));
    parts.push_back(std::async(std::launch::async, fold_files, slice));
  }
  PipelineReport report;
  for (auto& p : parts) report.merge(p.get());

  const fs::path cfg = run_dir / "run_config.json";
  if (fs::exists(cfg)) {
    try {
      const auto j = nlohmann::json::parse(read_file(cfg));
      report.config = j.value("config", nlohmann::json(nullptr));
      strip_execution_keys(report.config);
      report.config_digest = j.value("config_digest", "");
      const auto inputs = j.value("input_episodes", std::uint64_t{0});
      if (inputs > report.episodes_processed) {
        report.episodes_aborted_pending = inputs - report.episodes_processed;
      }
    } catch (const std::exception&) {
      report.corrupt_files.push_back("run_config.json");
      std::sort(report.corrupt_files.begin(), report.corrupt_files.end());
    }
  }
  return report;
}

nlohmann::ordered_json AuditSample::to_json() const {
  nlohmann::ordered_json j;
  j["population"] = population;
  j["n"] = episode_ids.size();
  j["seed"] = seed;
  j["failures"] = failures;
  j["estimate"] = estimate;
  j["interval_95"] = {interval.lo, interval.hi};
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < episode_ids.size(); ++i) {
    rows.push_back({{"episode_id", episode_ids[i]}, {"verdict", failed[i] ? "FAILURE" : "SUCCESS"}});
  }
  j["sample"] = rows;
  return j;
}

AuditSample sample_audit(std::span<const std::pair<std::string, bool>> population, std::size_t n,
                         std::uint64_t seed) {
  if (n == 0) throw ValidationError("audit sample size must be at least 1");
  if (n > population.size()) {
    throw ValidationError(fmt::format("audit sample size {} exceeds population {}", n,
                                      population.size()));
  }
  std::vector<std::size_t> idx(population.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng::Stream stream(rng::derive(seed, {"audit"}));
  // Partial Fisher-Yates: the first n slots end up a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(
        stream.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(idx.size() - 1)));
    std::swap(idx[i], idx[j]);
  }
  AuditSample out;
  out.population = population.size();
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [id, failed] = population[idx[i]];
    out.episode_ids.push_back(id);
    out.failed.push_back(failed);
    out.failures += failed;
  }
  out.estimate = static_cast<double>(out.failures) / static_cast<double>(n);
  out.interval = clopper_pearson(out.failures, n);
  return out;
}

AuditSample sample_audit(const fs::path& run_dir, std::size_t n, std::uint64_t seed) {
  std::vector<std::pair<std::string, bool>> population;
  for (const auto& f : episode_files(run_dir)) {
    try {
      const EpisodeSummary s = EpisodeSummary::from_json(nlohmann::json::parse(read_file(f)));
      population.emplace_back(s.episode_id, s.status == EpisodeStatus::Failure);
    } catch (const std::exception&) {
      // Corrupt records are surfaced by aggregate_report; they are not auditable.
    }
  }
  std::sort(population.begin(), population.end());
  return sample_audit(population, n, seed);
}

}  // namespace interleaf

#include "interleaf/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "interleaf/errors.hpp"
#include "interleaf/instruction.hpp"
#include "interleaf/interleave.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/manifest.hpp"
#include "interleaf/mock.hpp"
#include "interleaf/normalize.hpp"
#include "interleaf/synthetic.hpp"
#include "interleaf/verify.hpp"

#ifndef INTERLEAF_VERSION
#define INTERLEAF_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace interleaf {

std::string_view tool_version() { return INTERLEAF_VERSION; }

namespace {

constexpr std::string_view kJournalHeader = "# interleaf-journal v1 ";

// Keeps the frames of the episode a worker is on, so several phrases of
// one episode decode each image once.
class EpisodeFrameCache : public FrameSource {
 public:
  explicit EpisodeFrameCache(FrameSource& inner) : inner_(inner) {}
  cv::Mat load(const Episode& episode, std::size_t position) override {
    if (episode.id != id_) {
      cache_.clear();
      id_ = episode.id;
    }
    auto it = cache_.find(position);
    if (it == cache_.end()) it = cache_.emplace(position, inner_.load(episode, position)).first;
    return it->second;
  }

 private:
  FrameSource& inner_;
  std::string id_;
  std::map<std::size_t, cv::Mat> cache_;
};

std::string copy_web_image(const WebImagePool& pool, const std::string& ref, const fs::path& web_dir) {
  if (web_dir.empty()) return ref;
  const std::string bytes = read_file(pool.root() / ref);
  std::string ext = fs::path(ref).extension().string();
  if (ext.empty()) ext = ".img";
  const std::string name = sha256_hex(bytes) + ext;
  const fs::path dst = web_dir / name;
  if (!fs::exists(dst)) atomic_write_file(dst, bytes);
  return "web/" + name;
}

nlohmann::ordered_json frames_json(const Episode& ep, const NormalizationStats* stats,
                                   std::size_t* clamped) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const Frame& f : ep.frames) {
    nlohmann::ordered_json fj;
    fj["index"] = f.index;
    fj["image_refs"] = f.image_refs;
    fj["proprio"] = stats ? normalize_action(f.proprio, *stats, Direction::Forward, clamped) : f.proprio;
    fj["action"] = stats ? normalize_action(f.action, *stats, Direction::Forward, clamped) : f.action;
    arr.push_back(std::move(fj));
  }
  return arr;
}

ParsedInstruction parse_instruction(const Episode& ep, const EpisodeContext& ctx) {
  RequestContext rc;
  rc.episode_id = ep.id;
  switch (ctx.config->parser) {
    case ParserChoice::Rule:
      return extract_key_objects(ep.instruction, *ctx.lexicon);
    case ParserChoice::Service:
      return extract_key_objects(ep.instruction, *ctx.backend, rc);
    case ParserChoice::Auto:
      try {
        return extract_key_objects(ep.instruction, *ctx.lexicon);
      } catch (const NeedsService&) {
        return extract_key_objects(ep.instruction, *ctx.backend, rc);
      }
  }
  return extract_key_objects(ep.instruction, *ctx.lexicon);
}

nlohmann::ordered_json build_record(const Episode& ep, const EpisodeContext& ctx,
                                    const ParsedInstruction* parsed,
                                    const std::vector<Segment>& segments,
                                    const std::vector<nlohmann::ordered_json>& segment_meta,
                                    bool text_only) {
  const PipelineConfig& cfg = *ctx.config;
  const InterleavedSequence seq = assemble_sequence(segments, cfg.tokenizer);
  const Verdict verdict = validate_sequence(seq);
  if (!verdict.ok()) {
    throw ValidationError("assembled sequence invalid: " + verdict.violations.front().message);
  }
  const NormalizationStats* stats = nullptr;
  if (cfg.normalize_actions && ctx.stats) {
    auto it = ctx.stats->find(ep.source_dataset);
    if (it != ctx.stats->end()) stats = &it->second;
  }
  nlohmann::ordered_json r;
  r["episode_id"] = ep.id;
  r["source_dataset"] = ep.source_dataset;
  r["instruction"] = ep.instruction;
  r["template"] = parsed ? nlohmann::ordered_json(parsed->template_text) : nullptr;
  r["text_only"] = text_only;
  nlohmann::ordered_json segs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (segments[i].kind == SegmentKind::Text) {
      segs.push_back({{"kind", "text"}, {"text", segments[i].text}});
    } else {
      segs.push_back(segment_meta.at(*segments[i].slot));
    }
  }
  r["segments"] = std::move(segs);
  r["canonical"] = render_canonical(seq);
  r["actions_normalized"] = stats != nullptr;
  std::size_t clamped = 0;
  r["frames"] = frames_json(ep, stats, &clamped);
  r["clamped_values"] = clamped;
  r["provenance"] = {{"config_digest", ctx.config_digest}, {"tool_version", tool_version()}};
  return r;
}

nlohmann::ordered_json text_only_record(const Episode& ep, const EpisodeContext& ctx,
                                        const ParsedInstruction* parsed) {
  const std::string text = normalize_whitespace(ep.instruction);
  if (text.empty()) return nullptr;
  return build_record(ep, ctx, parsed, {Segment::make_text(text)}, {}, true);
}

}  // namespace

nlohmann::ordered_json process_episode(const Episode& episode, const EpisodeContext& ctx,
                                       Trail* timings) {
  const PipelineConfig& cfg = *ctx.config;
  nlohmann::ordered_json doc;
  doc["episode_id"] = episode.id;

  auto finish_failure = [&](const std::string& error, const ParsedInstruction* parsed,
                            nlohmann::ordered_json resolutions) {
    doc["status"] = to_string(EpisodeStatus::Failure);
    doc["zero_object"] = false;
    nlohmann::ordered_json record = nullptr;
    if (cfg.failure_policy == FailurePolicy::KeepTextOnly) record = text_only_record(episode, ctx, parsed);
    doc["emitted"] = !record.is_null();
    if (!error.empty()) doc["error"] = error;
    doc["normalization_clamped"] = record.is_null() ? 0 : record["clamped_values"].get<std::size_t>();
    doc["record"] = std::move(record);
    doc["resolutions"] = std::move(resolutions);
    return doc;
  };

  ParsedInstruction parsed;
  try {
    validate_episode(episode);
    parsed = parse_instruction(episode, ctx);
  } catch (const StageUnavailable&) {
    throw;
  } catch (const Error& e) {
    return finish_failure(std::string("parse: ") + e.what(), nullptr, nlohmann::ordered_json::array());
  }

  ResolveConfig rcfg;
  rcfg.mode = cfg.mode;
  rcfg.detection = cfg.detection;
  rcfg.crop = cfg.crop;

  std::vector<ObjectResolution> resolutions;
  nlohmann::ordered_json res_json = nlohmann::ordered_json::array();
  for (const std::string& phrase : parsed.phrases) {
    ObjectResolution r = resolve_object(episode, phrase, rcfg, *ctx.backend, *ctx.frames, *ctx.crops);
    if (timings) timings->insert(timings->end(), r.trail.begin(), r.trail.end());
    res_json.push_back(resolution_to_json(r));
    resolutions.push_back(std::move(r));
  }

  if (episode_status(resolutions) == EpisodeStatus::Failure) {
    return finish_failure("", &parsed, std::move(res_json));
  }

  std::vector<Filler> fillers;
  std::vector<nlohmann::ordered_json> meta;
  try {
    for (std::size_t i = 0; i < resolutions.size(); ++i) {
      const ObjectResolution& r = resolutions[i];
      const std::string key = fmt::format("{}\x1f{}\x1f{}", episode.id, i, r.phrase);
      const ImageChoice choice =
          choose_instruction_image(r.phrase, r.crop ? &*r.crop : nullptr, *ctx.pool, cfg.augment, key);
      nlohmann::ordered_json m;
      m["kind"] = "image";
      m["image_ref"] = choice.source == ImageSource::Web
                           ? copy_web_image(*ctx.pool, choice.image_ref, ctx.web_dir)
                           : choice.image_ref;
      m["phrase"] = r.phrase;
      m["bbox"] = {r.crop->source_bbox.x0, r.crop->source_bbox.y0, r.crop->source_bbox.x1,
                   r.crop->source_bbox.y1};
      m["source_frame"] = r.crop->source_frame;
      m["source"] = to_string(choice.source);
      if (choice.source == ImageSource::Web) {
        m["category"] = choice.category;
        m["pool_ref"] = choice.image_ref;
      }
      if (!choice.lookup.empty()) m["lookup"] = choice.lookup;
      m["status"] = to_string(r.status);
      meta.push_back(std::move(m));
      fillers.emplace_back(ImageFiller{i});
    }
  } catch (const AugmentUnavailable& e) {
    return finish_failure(std::string("augment: ") + e.what(), &parsed, std::move(res_json));
  }

  doc["status"] = to_string(EpisodeStatus::Success);
  doc["zero_object"] = parsed.phrases.empty();
  doc["emitted"] = true;
  const std::vector<Segment> segments = render_template(parsed, fillers);
  nlohmann::ordered_json record = build_record(episode, ctx, &parsed, segments, meta, false);
  doc["normalization_clamped"] = record["clamped_values"];
  doc["record"] = std::move(record);
  doc["resolutions"] = std::move(res_json);
  return doc;
}

std::vector<std::string> read_journal(const fs::path& journal, std::string* digest) {
  std::vector<std::string> ids;
  if (!fs::exists(journal)) return ids;
  for (const std::string& line : read_lines(journal)) {
    if (line.empty()) continue;
    if (line.starts_with(kJournalHeader)) {
      if (digest) *digest = line.substr(kJournalHeader.size());
      continue;
    }
    try {
      ids.push_back(nlohmann::json::parse(line).get<std::string>());
    } catch (const nlohmann::json::exception&) {
      // A torn final line from a crash: that episode simply reruns.
      spdlog::warn("ignoring unreadable journal line in {}", journal.string());
    }
  }
  return ids;
}

RunResult run_convert(const PipelineConfig& config, const fs::path& input_manifest,
                      const fs::path& out_dir, const RunOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  const DatasetManifest manifest = read_manifest(input_manifest);

  Lexicon lexicon = config.lexicon.empty() ? Lexicon::builtin() : Lexicon::load(config.lexicon);

  // Normalization statistics per source dataset.
  std::map<std::string, NormalizationStats> stats;
  if (config.normalize_actions) {
    std::map<std::string, std::vector<Episode>> by_source;
    for (const Episode& e : manifest.episodes) by_source[e.source_dataset].push_back(e);
    for (auto& [label, eps] : by_source) {
      if (manifest.stats && (manifest.stats->dataset_label == label ||
                             (manifest.stats->dataset_label.empty() && by_source.size() == 1))) {
        stats[label] = *manifest.stats;
        stats[label].dataset_label = label;
      } else {
        stats[label] = compute_norm_stats(eps, label);
      }
    }
  }

  std::unique_ptr<TruthIndex> truth;
  std::unique_ptr<ModelBackend> owned_backend;
  ModelBackend* backend = options.backend;
  if (!backend) {
    if (config.mock_in_process) {
      const fs::path truth_path =
          config.truth.empty() ? input_manifest.parent_path() / "truth.jsonl" : fs::path(config.truth);
      if (!fs::exists(truth_path)) {
        throw ValidationError("mock backends need a ground-truth sidecar; '" + truth_path.string() +
                              "' does not exist");
      }
      truth = std::make_unique<TruthIndex>(TruthIndex::load(truth_path));
      owned_backend = std::make_unique<MockBackend>(*truth, config.mock);
    } else {
      owned_backend = std::make_unique<HttpBackend>(config.endpoints, config.client);
    }
    backend = owned_backend.get();
  }
  ManifestFrameSource manifest_frames(manifest);
  FrameSource& frames = options.frames ? *options.frames : manifest_frames;
  const WebImagePool pool =
      config.pool_root.empty() ? WebImagePool() : WebImagePool::build(config.pool_root);

  fs::create_directories(out_dir / "episodes");
  fs::create_directories(out_dir / "web");
  CropStore crops(out_dir);

  const std::string run_digest =
      sha256_hex(config.digest() + "\n" + sha256_hex(read_file(input_manifest)));
  const fs::path journal_path = out_dir / "journal.log";
  std::string journal_digest;
  const std::vector<std::string> journaled = read_journal(journal_path, &journal_digest);
  const bool resuming = fs::exists(journal_path);
  if (resuming && journal_digest != run_digest) {
    throw ValidationError("output directory " + out_dir.string() +
                          " holds a run with a different config or input; use a fresh --out");
  }
  const std::set<std::string> done(journaled.begin(), journaled.end());

  {
    nlohmann::ordered_json rc;
    rc["tool_version"] = tool_version();
    rc["config_digest"] = run_digest;
    rc["input_sha256"] = sha256_hex(read_file(input_manifest));
    rc["input_episodes"] = manifest.episodes.size();
    rc["config"] = config.to_json();
    atomic_write_file(out_dir / "run_config.json", rc.dump(2) + "\n");
  }

  std::ofstream journal(journal_path, std::ios::app | std::ios::binary);
  if (!journal) throw IoError("cannot open journal " + journal_path.string());
  if (!resuming) journal << kJournalHeader << run_digest << "\n" << std::flush;

  std::vector<const Episode*> pending;
  for (const Episode& e : manifest.episodes) {
    if (!done.contains(e.id)) pending.push_back(&e);
  }

  RunResult result;
  result.skipped_from_journal = manifest.episodes.size() - pending.size();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex mu;  // journal, timings, abort reason, progress
  PipelineReport timing_acc;
  std::size_t finished = 0;

  auto worker = [&] {
    EpisodeFrameCache cache(frames);
    EpisodeContext ctx;
    ctx.config = &config;
    ctx.lexicon = &lexicon;
    ctx.backend = backend;
    ctx.frames = &cache;
    ctx.crops = &crops;
    ctx.pool = &pool;
    ctx.web_dir = out_dir / "web";
    ctx.stats = &stats;
    ctx.config_digest = run_digest;
    while (!abort.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) break;
      const Episode& ep = *pending[i];
      Trail trail;
      nlohmann::ordered_json doc;
      try {
        doc = process_episode(ep, ctx, &trail);
      } catch (const StageUnavailable& e) {
        std::lock_guard lock(mu);
        if (!abort.exchange(true)) result.abort_reason = e.what();
        break;
      } catch (const std::exception& e) {
        // Per-episode failures never abort the run.
        spdlog::warn("episode {} failed: {}", ep.id, e.what());
        doc = nlohmann::ordered_json();
        doc["episode_id"] = ep.id;
        doc["status"] = to_string(EpisodeStatus::Failure);
        doc["zero_object"] = false;
        doc["emitted"] = false;
        doc["error"] = e.what();
        doc["record"] = nullptr;
        doc["resolutions"] = nlohmann::ordered_json::array();
      }
      atomic_write_file(out_dir / "episodes" / (safe_file_stem(ep.id) + ".json"), doc.dump() + "\n");
      std::lock_guard lock(mu);
      journal << nlohmann::json(ep.id).dump() << "\n" << std::flush;
      for (const StageRecord& r : trail) {
        if (r.stage != "detect" && r.stage != "verify" && r.stage != "segment") continue;
        StageTiming& t = timing_acc.stage_timings[r.stage];
        ++t.calls;
        t.total_us += r.elapsed_us;
      }
      ++finished;
      if (options.progress) options.progress(finished + result.skipped_from_journal,
                                             manifest.episodes.size());
    }
  };

  const std::size_t n_workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(config.workers),
                                                       std::max<std::size_t>(1, pending.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t w = 0; w < n_workers; ++w) pool_threads.emplace_back(worker);
  }
  journal.close();
  result.processed_this_run = finished;

  if (!abort.load()) {
    std::string records;
    for (const Episode& e : manifest.episodes) {
      const fs::path f = out_dir / "episodes" / (safe_file_stem(e.id) + ".json");
      try {
        const auto doc = nlohmann::ordered_json::parse(read_file(f));
        if (doc.value("emitted", false)) records += doc.at("record").dump() + "\n";
      } catch (const std::exception& ex) {
        spdlog::warn("episode file {} unreadable: {}", f.string(), ex.what());
      }
    }
    atomic_write_file(out_dir / "records.jsonl", records);
  }

  result.report = aggregate_report(out_dir);
  result.report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  result.report.stage_timings = timing_acc.stage_timings;

  atomic_write_file(out_dir / "report.json", result.report.to_json(false).dump(2) + "\n");
  atomic_write_file(out_dir / "report.txt", result.report.to_text());
  nlohmann::ordered_json timing = result.report.to_json(true);
  nlohmann::ordered_json slim;
  slim["wall_clock_s"] = timing["wall_clock_s"];
  slim["stage_timings"] = timing["stage_timings"];
  slim["processed_this_run"] = result.processed_this_run;
  slim["workers"] = n_workers;
  atomic_write_file(out_dir / "timings.json", slim.dump(2) + "\n");

  if (abort.load()) {
    result.exit_code = (journaled.empty() && finished == 0) ? kExitBackendUnavailable : kExitResumable;
    spdlog::error("run aborted ({} of {} episodes done): {}", journaled.size() + finished,
                  manifest.episodes.size(), result.abort_reason);
  }
  return result;
}

}  // namespace interleaf

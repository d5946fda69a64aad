#include "interleaf/manifest.hpp"

#include <algorithm>
#include <future>
#include <thread>
#include <unordered_set>

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace interleaf {

namespace {

Pose7 pose_from_json(const json& j, std::string_view what) {
  if (!j.is_array()) {
    throw DimensionError(std::string(what) + " must be an array");
  }
  std::vector<double> values;
  values.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) {
      throw ValidationError(std::string(what) + " entries must be numbers");
    }
    values.push_back(v.get<double>());
  }
  return to_pose7(values, what);
}

ordered_json pose_to_json(const Pose7& p) {
  ordered_json arr = ordered_json::array();
  for (double v : p) arr.push_back(v);
  return arr;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw ValidationError(std::string("missing field '") + key + "'");
  }
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return v.get<std::string>();
}

}  // namespace

ordered_json stats_to_json(const NormalizationStats& stats) {
  ordered_json j;
  j["dataset_label"] = stats.dataset_label;
  j["min"] = pose_to_json(stats.min);
  j["max"] = pose_to_json(stats.max);
  return j;
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats s;
  s.dataset_label = j.value("dataset_label", "");
  s.min = pose_from_json(require(j, "min"), "stats.min");
  s.max = pose_from_json(require(j, "max"), "stats.max");
  for (std::size_t i = 0; i < kPoseDims; ++i) {
    if (s.min[i] > s.max[i]) {
      throw ValidationError("stats.min exceeds stats.max in dimension " + std::to_string(i));
    }
  }
  return s;
}

ordered_json episode_to_json(const Episode& episode) {
  ordered_json j;
  j["id"] = episode.id;
  j["source_dataset"] = episode.source_dataset;
  j["instruction"] = episode.instruction;
  ordered_json frames = ordered_json::array();
  for (const Frame& f : episode.frames) {
    ordered_json fj;
    fj["index"] = f.index;
    fj["image_refs"] = f.image_refs;
    fj["proprio"] = pose_to_json(f.proprio);
    fj["action"] = pose_to_json(f.action);
    frames.push_back(std::move(fj));
  }
  j["frames"] = std::move(frames);
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : episode.meta) meta[k] = v;
  j["meta"] = std::move(meta);
  return j;
}

Episode episode_from_json(const json& j) {
  if (!j.is_object()) {
    throw ValidationError("episode record must be an object");
  }
  Episode e;
  e.id = require_string(j, "id");
  e.source_dataset = require_string(j, "source_dataset");
  e.instruction = require_string(j, "instruction");
  const json& frames = require(j, "frames");
  if (!frames.is_array()) {
    throw ValidationError("field 'frames' must be an array");
  }
  e.frames.reserve(frames.size());
  for (const json& fj : frames) {
    Frame f;
    const json& index = require(fj, "index");
    if (!index.is_number_integer()) {
      throw ValidationError("frame index must be an integer");
    }
    f.index = index.get<std::int64_t>();
    const json& refs = require(fj, "image_refs");
    if (!refs.is_array()) {
      throw ValidationError("image_refs must be an array");
    }
    for (const json& r : refs) {
      if (!r.is_string()) throw ValidationError("image_refs entries must be strings");
      f.image_refs.push_back(r.get<std::string>());
    }
    f.proprio = pose_from_json(require(fj, "proprio"), "proprio");
    f.action = pose_from_json(require(fj, "action"), "action");
    e.frames.push_back(std::move(f));
  }
  if (auto it = j.find("meta"); it != j.end()) {
    if (!it->is_object()) throw ValidationError("meta must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw ValidationError("meta values must be strings");
      e.meta.emplace(k, v.get<std::string>());
    }
  }
  validate_episode(e);
  return e;
}

std::string serialize_header(const DatasetManifest& manifest) {
  ordered_json h;
  h["format_version"] = manifest.version;
  h["euler_convention"] = manifest.euler_convention;
  h["image_root"] = manifest.image_root;
  if (manifest.stats) h["stats"] = stats_to_json(*manifest.stats);
  return h.dump();
}

std::string serialize_episode(const Episode& episode) {
  return episode_to_json(episode).dump();
}

DatasetManifest read_manifest(const fs::path& path) {
  if (!fs::exists(path)) {
    throw IoError("manifest not found: " + path.string());
  }
  const std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) {
    throw ManifestError(1, "missing header line");
  }

  DatasetManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  try {
    const json header = json::parse(lines[0]);
    m.version = require_string(header, "format_version");
    if (m.version != kManifestFormatVersion) {
      throw ValidationError("unrecognized format_version '" + m.version + "'");
    }
    m.euler_convention = require_string(header, "euler_convention");
    m.image_root = require_string(header, "image_root");
    if (auto it = header.find("stats"); it != header.end()) {
      m.stats = stats_from_json(*it);
    }
  } catch (const json::exception& e) {
    throw ManifestError(1, std::string("malformed header: ") + e.what());
  } catch (const ValidationError& e) {
    throw ManifestError(1, e.what());
  }

  // Body lines are independent; parse them in parallel chunks.
  std::vector<std::size_t> body;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (!lines[i].empty()) body.push_back(i);
  }
  std::vector<Episode> episodes(body.size());
  auto parse_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t k = lo; k < hi; ++k) {
      const std::size_t line_no = body[k] + 1;
      try {
        episodes[k] = episode_from_json(json::parse(lines[body[k]]));
      } catch (const json::exception& e) {
        throw ManifestError(line_no, std::string("malformed record: ") + e.what());
      } catch (const ValidationError& e) {
        throw ManifestError(line_no, e.what());
      }
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  if (body.size() < 256 || workers == 1) {
    parse_range(0, body.size());
  } else {
    std::vector<std::future<void>> tasks;
    const std::size_t chunk = (body.size() + workers - 1) / workers;
    for (std::size_t lo = 0; lo < body.size(); lo += chunk) {
      tasks.push_back(std::async(std::launch::async, parse_range, lo,
                                 std::min(body.size(), lo + chunk)));
    }
    // Surface the earliest failing chunk first for a stable line number.
    for (auto& t : tasks) t.get();
  }

  std::unordered_set<std::string> seen;
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const Episode& e = episodes[k];
    const std::size_t line_no = body[k] + 1;
    if (!seen.insert(e.id).second) {
      throw ManifestError(line_no, "duplicate episode id '" + e.id + "'");
    }
    for (const Frame& f : e.frames) {
      for (const std::string& ref : f.image_refs) {
        if (!fs::exists(m.base_dir / m.image_root / ref)) {
          throw ManifestError(line_no, "dangling image reference '" + ref + "' in episode '" +
                                           e.id + "'");
        }
      }
    }
  }
  m.episodes = std::move(episodes);
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::unordered_set<std::string> seen;
  std::string out = serialize_header(manifest);
  out.push_back('\n');
  for (const Episode& e : manifest.episodes) {
    validate_episode(e);
    if (!seen.insert(e.id).second) {
      throw ValidationError("duplicate episode id '" + e.id + "'");
    }
    out += serialize_episode(e);
    out.push_back('\n');
  }
  atomic_write_file(path, out);
}

}  // namespace interleaf

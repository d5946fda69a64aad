#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "interleaf/episode.hpp"

namespace interleaf {

// Manifest layout: UTF-8, one JSON record per line.
//   line 1:  {"format_version", "euler_convention", "image_root", "stats"?}
//   line 2+: {"id", "source_dataset", "instruction",
//             "frames": [{"index", "image_refs", "proprio", "action"}], "meta"}
// Keys are written in exactly this order; meta keys sorted.

/// Reads and fully validates a manifest. Image files must exist, but pixel
/// data is not loaded. Throws ManifestError (with line number) or IoError.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes the canonical form atomically (temp file + rename).
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

std::string serialize_header(const DatasetManifest& manifest);
std::string serialize_episode(const Episode& episode);

nlohmann::ordered_json episode_to_json(const Episode& episode);
Episode episode_from_json(const nlohmann::json& j);
nlohmann::ordered_json stats_to_json(const NormalizationStats& stats);
NormalizationStats stats_from_json(const nlohmann::json& j);

}  // namespace interleaf

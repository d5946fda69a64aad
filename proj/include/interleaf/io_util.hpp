#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace interleaf {

/// Writes `content` to a sibling temp file then renames it into place.
/// On failure no file (partial or temp) is left behind; throws IoError.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Reads a file and splits it into lines (without terminators).
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::string_view data);
/// Throws ProtocolError on malformed input.
std::string base64_decode(std::string_view encoded);

/// Maps an arbitrary id to a safe filename stem.
std::string safe_file_stem(std::string_view id);

}  // namespace interleaf

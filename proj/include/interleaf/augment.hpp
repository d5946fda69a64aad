#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "interleaf/detect.hpp"
#include "interleaf/lexicon.hpp"

namespace interleaf {

enum class AugmentMode { InternetOnly, TaskOnly, Mixed };

std::string_view to_string(AugmentMode m);
AugmentMode augment_mode_from_string(std::string_view s);

struct AugmentPolicy {
  AugmentMode mode = AugmentMode::TaskOnly;
  /// Probability of a web image in mixed mode.
  double mix_ratio = 0.5;
  std::uint64_t seed = 0;

  /// Ablation presets: "internet-only", "task-only", "mixed" (r = 0.5).
  static AugmentPolicy preset(std::string_view name, std::uint64_t seed = 0);
  void validate() const;
};

/// Lowercase, trimmed, single-spaced, last word singularized.
std::string normalize_category(std::string_view text);

/// Last noun of the leading noun phrase ("the blue spoon near microwave" ->
/// "spoon"). Falls back to the last word before the first preposition.
std::string head_noun(std::string_view phrase, const Lexicon& lexicon = Lexicon::builtin());

/// Category-bucketed web images under <root>/<category>/<file>. The index is
/// cached in a sidecar file and rebuilt when the tree's fingerprint changes.
class WebImagePool {
 public:
  static constexpr const char* kIndexFile = ".interleaf_pool_index.json";

  WebImagePool() = default;
  /// Scans (or reuses the cached index of) `root`. Undecodable files are
  /// skipped with a warning. Throws IoError if root is not a directory.
  static WebImagePool build(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  /// References are "<category>/<file>" relative to root.
  const std::vector<std::string>* bucket(std::string_view category) const;
  std::size_t category_count() const { return index_.size(); }
  std::size_t image_count() const;
  const std::string& fingerprint() const { return fingerprint_; }
  bool loaded_from_cache() const { return from_cache_; }

  /// In-memory pool for tests and synthetic runs.
  static WebImagePool from_index(std::filesystem::path root,
                                 std::map<std::string, std::vector<std::string>, std::less<>> index);

 private:
  std::filesystem::path root_;
  std::map<std::string, std::vector<std::string>, std::less<>> index_;
  std::string fingerprint_;
  bool from_cache_ = false;
};

enum class ImageSource { Crop, Web };

std::string_view to_string(ImageSource s);

struct ImageChoice {
  ImageSource source = ImageSource::Crop;
  /// Crop store reference or pool-relative reference.
  std::string image_ref;
  /// Pool category that supplied a web image (empty for crops).
  std::string category;
  /// How the category lookup resolved: "exact", "head-noun", "miss", or
  /// empty when the pool was not consulted.
  std::string lookup;
};

/// Picks the image for one instruction slot. The draw is a pure function of
/// (policy.seed, draw_key). Throws AugmentUnavailable when the mode needs an
/// image neither the pool nor the crop can supply.
ImageChoice choose_instruction_image(std::string_view phrase, const CropArtifact* crop,
                                     const WebImagePool& pool, const AugmentPolicy& policy,
                                     std::string_view draw_key);

}  // namespace interleaf

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <opencv2/core.hpp>

#include "json.hpp"

#include "interleaf/detect.hpp"
#include "interleaf/episode.hpp"
#include "interleaf/geometry.hpp"

namespace interleaf {

// Toy tabletop world: flat-colored shapes on a tiled background, an
// instruction "put the <color> <shape> on the <color> <shape>", and a gray
// arm that enters from the top edge after frame 0 and descends toward the
// object to pick.

struct SceneConfig {
  int width = 320;
  int height = 240;
  int frames = 20;
  int min_distractors = 1;
  int max_distractors = 3;
  int min_object_size = 28;
  int max_object_size = 56;
  /// Minimum empty pixels between any two objects.
  int gap = 4;
  int arm_width = 26;
  int max_layout_retries = 200;

  void validate() const;
};

enum class ObjectRole { Pick, Place, Distractor };

std::string_view to_string(ObjectRole r);
ObjectRole object_role_from_string(std::string_view s);

struct SceneObject {
  /// Surface phrase in the instruction ("the red block"); distractors get
  /// one too, though it never appears in the instruction.
  std::string phrase;
  /// Lexicon noun, also the web pool category.
  std::string category;
  std::string color;
  std::string shape;
  ObjectRole role = ObjectRole::Distractor;
  BBox bbox;
  Point centroid;
};

struct SyntheticScene {
  std::string episode_id;
  std::uint64_t seed = 0;
  int width = 0;
  int height = 0;
  int frames = 0;
  std::string instruction;
  std::vector<SceneObject> objects;
  int distractor_count = 0;
  int arm_width = 0;

  const SceneObject& pick() const;
  const SceneObject& place() const;
  /// Arm rectangle at `frame`; none at frame 0.
  std::optional<BBox> arm_at(int frame) const;
};

const std::vector<std::string>& synthetic_colors();
const std::vector<std::string>& synthetic_shapes();

/// Deterministic in (cfg, seed, episode_id). Throws ValidationError when no
/// layout fits after cfg.max_layout_retries attempts.
SyntheticScene make_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& episode_id);

/// Renders one camera frame (BGR, width x height).
cv::Mat render_frame(const SyntheticScene& scene, int frame);

/// Episode record for a scene. Image refs are images/<id>/<frame:03d>.png.
Episode scene_episode(const SyntheticScene& scene);

/// Scenes for episode ids syn-000000 .. syn-<count-1>.
std::vector<SyntheticScene> generate_scenes(std::size_t count, const SceneConfig& cfg,
                                            std::uint64_t seed);

struct GeneratedSet {
  DatasetManifest manifest;
  std::filesystem::path manifest_path;
  std::filesystem::path truth_path;
};

/// Writes images/, manifest.jsonl and truth.jsonl under `out_dir`.
/// Throws ValidationError when count is 0.
GeneratedSet generate_episode_set(std::size_t count, const SceneConfig& cfg, std::uint64_t seed,
                                  const std::filesystem::path& out_dir, int workers = 0);

/// One sidecar line per (episode, frame).
nlohmann::ordered_json truth_line(const SyntheticScene& scene, int frame);

/// Ground truth loaded from the sidecar, keyed by episode id.
class TruthIndex {
 public:
  struct EpisodeTruth {
    std::vector<SceneObject> objects;
    std::map<std::int64_t, BBox> arm;
  };

  TruthIndex() = default;
  static TruthIndex load(const std::filesystem::path& sidecar);
  static TruthIndex from_scenes(const std::vector<SyntheticScene>& scenes);

  const EpisodeTruth* episode(std::string_view id) const;
  /// Object whose phrase matches (case and spacing insensitive).
  const SceneObject* object(std::string_view episode_id, std::string_view phrase) const;
  std::optional<BBox> arm(std::string_view episode_id, std::int64_t frame) const;
  std::size_t size() const { return episodes_.size(); }

 private:
  std::map<std::string, EpisodeTruth, std::less<>> episodes_;
};

/// Renders frames from scenes on demand instead of reading files.
class SceneFrameSource : public FrameSource {
 public:
  explicit SceneFrameSource(const std::vector<SyntheticScene>& scenes);
  cv::Mat load(const Episode& episode, std::size_t position) override;

 private:
  std::map<std::string, const SyntheticScene*, std::less<>> by_id_;
};

}  // namespace interleaf

#include "interleaf/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <thread>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "interleaf/errors.hpp"
#include "interleaf/image_io.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/manifest.hpp"
#include "interleaf/rng.hpp"

namespace fs = std::filesystem;

namespace interleaf {

void SceneConfig::validate() const {
  if (width < 32 || height < 32) throw ValidationError("canvas must be at least 32x32");
  if (frames < 1) throw ValidationError("episodes need at least one frame");
  if (min_distractors < 1 || max_distractors < min_distractors) {
    throw ValidationError("distractor range must satisfy 1 <= min <= max");
  }
  if (min_object_size < 4 || max_object_size < min_object_size) {
    throw ValidationError("object size range must satisfy 4 <= min <= max");
  }
  if (max_object_size + 2 * gap > std::min(width, height)) {
    throw ValidationError("objects do not fit on the canvas");
  }
  if (gap < 0 || arm_width < 1 || max_layout_retries < 1) {
    throw ValidationError("gap, arm width and retry budget must be positive");
  }
}

std::string_view to_string(ObjectRole r) {
  switch (r) {
    case ObjectRole::Pick: return "pick";
    case ObjectRole::Place: return "place";
    case ObjectRole::Distractor: return "distractor";
  }
  return "distractor";
}

ObjectRole object_role_from_string(std::string_view s) {
  if (s == "pick") return ObjectRole::Pick;
  if (s == "place") return ObjectRole::Place;
  if (s == "distractor") return ObjectRole::Distractor;
  throw ValidationError("unknown object role '" + std::string(s) + "'");
}

const SceneObject& SyntheticScene::pick() const {
  for (const auto& o : objects) {
    if (o.role == ObjectRole::Pick) return o;
  }
  throw ValidationError("scene has no pick object");
}

const SceneObject& SyntheticScene::place() const {
  for (const auto& o : objects) {
    if (o.role == ObjectRole::Place) return o;
  }
  throw ValidationError("scene has no place object");
}

std::optional<BBox> SyntheticScene::arm_at(int frame) const {
  if (frame <= 0 || frames < 2) return std::nullopt;
  const SceneObject& target = pick();
  const double progress = static_cast<double>(frame) / (frames - 1);
  const int cx = static_cast<int>(std::lround(target.centroid.x));
  const int reach = std::max(1, static_cast<int>(std::lround(progress * target.centroid.y)));
  const BBox arm = clamp_to_frame({cx - arm_width / 2, 0, cx - arm_width / 2 + arm_width, reach},
                                  width, height);
  if (!arm.valid()) return std::nullopt;
  return arm;
}

const std::vector<std::string>& synthetic_colors() {
  static const std::vector<std::string> colors{"red", "green", "blue", "yellow", "purple", "cyan"};
  return colors;
}

const std::vector<std::string>& synthetic_shapes() {
  static const std::vector<std::string> shapes{"block", "ball", "triangle", "ring", "cross"};
  return shapes;
}

namespace {

cv::Scalar color_bgr(std::string_view name) {
  if (name == "red") return {40, 40, 220};
  if (name == "green") return {60, 180, 60};
  if (name == "blue") return {220, 80, 40};
  if (name == "yellow") return {40, 220, 230};
  if (name == "purple") return {170, 60, 150};
  return {220, 210, 40};  // cyan
}

bool clear_of(const BBox& b, const std::vector<SceneObject>& placed, int gap) {
  const BBox grown{b.x0 - gap, b.y0 - gap, b.x1 + gap, b.y1 + gap};
  return std::none_of(placed.begin(), placed.end(),
                      [&](const SceneObject& o) { return intersect(grown, o.bbox).valid(); });
}

SceneObject make_object(const std::string& color, const std::string& shape, ObjectRole role) {
  SceneObject o;
  o.color = color;
  o.shape = shape;
  o.category = shape;
  o.phrase = "the " + color + " " + shape;
  o.role = role;
  return o;
}

std::optional<std::vector<SceneObject>> try_layout(std::vector<SceneObject> objects,
                                                   const SceneConfig& cfg, rng::Stream& rs) {
  std::vector<SceneObject> placed;
  for (auto& o : objects) {
    bool ok = false;
    for (int attempt = 0; attempt < 50 && !ok; ++attempt) {
      const int size = static_cast<int>(rs.uniform_int(cfg.min_object_size, cfg.max_object_size));
      const int x0 = static_cast<int>(rs.uniform_int(cfg.gap, cfg.width - cfg.gap - size));
      const int y0 = static_cast<int>(rs.uniform_int(cfg.gap, cfg.height - cfg.gap - size));
      const BBox b{x0, y0, x0 + size, y0 + size};
      if (clear_of(b, placed, cfg.gap)) {
        o.bbox = b;
        o.centroid = {b.center_x(), b.center_y()};
        placed.push_back(o);
        ok = true;
      }
    }
    if (!ok) return std::nullopt;
  }
  return placed;
}

// Catmull-Rom through evenly spaced control points, clamped to [lo, hi].
std::vector<double> smooth_track(rng::Stream& rs, int frames, double lo, double hi) {
  constexpr int kControls = 5;
  std::array<double, kControls> c{};
  for (double& v : c) v = rs.uniform(lo, hi);
  std::vector<double> out(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t) {
    const double s = frames > 1 ? static_cast<double>(t) / (frames - 1) * (kControls - 1) : 0.0;
    const int i = std::min(static_cast<int>(s), kControls - 2);
    const double u = s - i;
    const double p0 = c[std::max(i - 1, 0)];
    const double p1 = c[i];
    const double p2 = c[i + 1];
    const double p3 = c[std::min(i + 2, kControls - 1)];
    const double v = 0.5 * (2 * p1 + (-p0 + p2) * u + (2 * p0 - 5 * p1 + 4 * p2 - p3) * u * u +
                            (-p0 + 3 * p1 - 3 * p2 + p3) * u * u * u);
    out[static_cast<std::size_t>(t)] = std::clamp(v, lo, hi);
  }
  return out;
}

}  // namespace

SyntheticScene make_scene(const SceneConfig& cfg, std::uint64_t seed, const std::string& episode_id) {
  cfg.validate();
  const auto& colors = synthetic_colors();
  const auto& shapes = synthetic_shapes();
  rng::Stream rs(rng::derive(seed, {"scene", episode_id}));
  auto pick_of = [&](const std::vector<std::string>& v) {
    return v[static_cast<std::size_t>(rs.uniform_int(0, static_cast<std::int64_t>(v.size()) - 1))];
  };

  SyntheticScene scene;
  scene.episode_id = episode_id;
  scene.seed = seed;
  scene.width = cfg.width;
  scene.height = cfg.height;
  scene.frames = cfg.frames;
  scene.arm_width = cfg.arm_width;

  const std::string pick_shape = pick_of(shapes);
  std::string place_shape = pick_shape;
  while (place_shape == pick_shape) place_shape = pick_of(shapes);
  std::vector<SceneObject> objects{make_object(pick_of(colors), pick_shape, ObjectRole::Pick),
                                   make_object(pick_of(colors), place_shape, ObjectRole::Place)};
  std::vector<std::string> other_shapes;
  for (const auto& s : shapes) {
    if (s != pick_shape && s != place_shape) other_shapes.push_back(s);
  }
  const int distractors =
      static_cast<int>(rs.uniform_int(cfg.min_distractors, cfg.max_distractors));
  for (int d = 0; d < distractors; ++d) {
    // Distractor phrases must be unique within the scene.
    for (;;) {
      SceneObject o = make_object(pick_of(colors), pick_of(other_shapes), ObjectRole::Distractor);
      const bool dup = std::any_of(objects.begin(), objects.end(),
                                   [&](const SceneObject& x) { return x.phrase == o.phrase; });
      if (!dup) {
        objects.push_back(std::move(o));
        break;
      }
    }
  }
  scene.distractor_count = distractors;
  scene.instruction =
      "put " + objects[0].phrase + " on " + objects[1].phrase;

  for (int attempt = 0; attempt < cfg.max_layout_retries; ++attempt) {
    if (auto laid = try_layout(objects, cfg, rs)) {
      scene.objects = std::move(*laid);
      return scene;
    }
  }
  throw ValidationError(fmt::format("no layout for episode '{}' after {} retries", episode_id,
                                    cfg.max_layout_retries));
}

cv::Mat render_frame(const SyntheticScene& scene, int frame) {
  constexpr int kTile = 16;
  cv::Mat img(scene.height, scene.width, CV_8UC3);
  for (int ty = 0; ty * kTile < scene.height; ++ty) {
    for (int tx = 0; tx * kTile < scene.width; ++tx) {
      const auto h = rng::splitmix64(scene.seed ^ (static_cast<std::uint64_t>(ty) << 32 | tx));
      const int shade = 186 + static_cast<int>(h % 3) * 8;
      const cv::Rect r(tx * kTile, ty * kTile, std::min(kTile, scene.width - tx * kTile),
                       std::min(kTile, scene.height - ty * kTile));
      img(r).setTo(cv::Scalar(shade, shade, shade - 6));
    }
  }
  for (const auto& o : scene.objects) {
    const cv::Scalar c = color_bgr(o.color);
    const BBox& b = o.bbox;
    const cv::Point center(b.x0 + b.width() / 2, b.y0 + b.height() / 2);
    const int r = b.width() / 2;
    if (o.shape == "block") {
      cv::rectangle(img, cv::Rect(b.x0, b.y0, b.width(), b.height()), c, cv::FILLED);
    } else if (o.shape == "ball") {
      cv::circle(img, center, r, c, cv::FILLED, cv::LINE_8);
    } else if (o.shape == "ring") {
      const int t = std::max(3, b.width() / 5);
      cv::circle(img, center, r - t / 2, c, t, cv::LINE_8);
    } else if (o.shape == "triangle") {
      const std::vector<cv::Point> pts{{b.x0 + b.width() / 2, b.y0},
                                       {b.x0, b.y1 - 1},
                                       {b.x1 - 1, b.y1 - 1}};
      cv::fillConvexPoly(img, pts, c, cv::LINE_8);
    } else {
      const int t = std::max(4, b.width() / 3);
      cv::rectangle(img, cv::Rect(b.x0, center.y - t / 2, b.width(), t), c, cv::FILLED);
      cv::rectangle(img, cv::Rect(center.x - t / 2, b.y0, t, b.height()), c, cv::FILLED);
    }
  }
  if (auto arm = scene.arm_at(frame)) {
    cv::rectangle(img, cv::Rect(arm->x0, arm->y0, arm->width(), arm->height()),
                  cv::Scalar(90, 90, 90), cv::FILLED);
  }
  return img;
}

Episode scene_episode(const SyntheticScene& scene) {
  Episode ep;
  ep.id = scene.episode_id;
  ep.source_dataset = "synthetic";
  ep.instruction = scene.instruction;
  ep.meta["generator"] = "interleaf-synth";
  ep.meta["scene_seed"] = std::to_string(scene.seed);

  rng::Stream rs(rng::derive(scene.seed, {"trajectory", scene.episode_id}));
  // Declared ranges: action deltas and absolute proprio state.
  constexpr Pose7 kActLo{-0.05, -0.05, -0.05, -0.25, -0.25, -0.25, 0.0};
  constexpr Pose7 kActHi{0.05, 0.05, 0.05, 0.25, 0.25, 0.25, 1.0};
  constexpr Pose7 kPropLo{0.2, -0.3, 0.0, -3.14159, -1.5, -3.14159, 0.0};
  constexpr Pose7 kPropHi{0.6, 0.3, 0.4, 3.14159, 1.5, 3.14159, 1.0};
  std::array<std::vector<double>, kPoseDims> act;
  std::array<std::vector<double>, kPoseDims> prop;
  for (std::size_t d = 0; d < kPoseDims; ++d) {
    act[d] = smooth_track(rs, scene.frames, kActLo[d], kActHi[d]);
    prop[d] = smooth_track(rs, scene.frames, kPropLo[d], kPropHi[d]);
  }
  for (int t = 0; t < scene.frames; ++t) {
    Frame f;
    f.index = t;
    f.image_refs = {fmt::format("images/{}/{:03d}.png", scene.episode_id, t)};
    for (std::size_t d = 0; d < kPoseDims; ++d) {
      f.action[d] = act[d][static_cast<std::size_t>(t)];
      f.proprio[d] = prop[d][static_cast<std::size_t>(t)];
    }
    ep.frames.push_back(std::move(f));
  }
  return ep;
}

std::vector<SyntheticScene> generate_scenes(std::size_t count, const SceneConfig& cfg,
                                            std::uint64_t seed) {
  if (count == 0) throw ValidationError("episode count must be at least 1");
  std::vector<SyntheticScene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    scenes.push_back(make_scene(cfg, seed, fmt::format("syn-{:06d}", i)));
  }
  return scenes;
}

nlohmann::ordered_json truth_line(const SyntheticScene& scene, int frame) {
  nlohmann::ordered_json j;
  j["episode_id"] = scene.episode_id;
  j["frame"] = frame;
  nlohmann::ordered_json objs = nlohmann::ordered_json::array();
  for (const auto& o : scene.objects) {
    nlohmann::ordered_json oj;
    oj["category"] = o.category;
    oj["phrase"] = o.phrase;
    oj["color"] = o.color;
    oj["shape"] = o.shape;
    oj["role"] = to_string(o.role);
    oj["bbox"] = {o.bbox.x0, o.bbox.y0, o.bbox.x1, o.bbox.y1};
    oj["centroid"] = {o.centroid.x, o.centroid.y};
    objs.push_back(std::move(oj));
  }
  j["objects"] = std::move(objs);
  if (auto arm = scene.arm_at(frame)) {
    j["arm"] = {arm->x0, arm->y0, arm->x1, arm->y1};
  } else {
    j["arm"] = nullptr;
  }
  return j;
}

GeneratedSet generate_episode_set(std::size_t count, const SceneConfig& cfg, std::uint64_t seed,
                                  const fs::path& out_dir, int workers) {
  const std::vector<SyntheticScene> scenes = generate_scenes(count, cfg, seed);
  fs::create_directories(out_dir);

  const std::size_t shards = workers > 0
                                 ? static_cast<std::size_t>(workers)
                                 : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  auto render_shard = [&](std::size_t shard) {
    for (std::size_t i = shard; i < scenes.size(); i += shards) {
      const SyntheticScene& s = scenes[i];
      fs::create_directories(out_dir / "images" / s.episode_id);
      for (int t = 0; t < s.frames; ++t) {
        save_png(render_frame(s, t), out_dir / fmt::format("images/{}/{:03d}.png", s.episode_id, t));
      }
    }
  };
  std::vector<std::future<void>> jobs;
  for (std::size_t k = 0; k < shards; ++k) jobs.push_back(std::async(std::launch::async, render_shard, k));
  for (auto& j : jobs) j.get();

  GeneratedSet out;
  out.manifest_path = out_dir / "manifest.jsonl";
  out.truth_path = out_dir / "truth.jsonl";
  std::string truth;
  for (const auto& s : scenes) {
    out.manifest.episodes.push_back(scene_episode(s));
    for (int t = 0; t < s.frames; ++t) truth += truth_line(s, t).dump() + "\n";
  }
  write_manifest(out.manifest, out.manifest_path);
  atomic_write_file(out.truth_path, truth);
  out.manifest.base_dir = out_dir;
  return out;
}

namespace {

std::string phrase_key(std::string_view phrase) {
  std::string out;
  bool space = false;
  for (char c : phrase) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

BBox box_from(const nlohmann::json& j) {
  return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

}  // namespace

TruthIndex TruthIndex::load(const fs::path& sidecar) {
  TruthIndex idx;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(sidecar)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      EpisodeTruth& ep = idx.episodes_[j.at("episode_id").get<std::string>()];
      const auto frame = j.at("frame").get<std::int64_t>();
      if (ep.objects.empty()) {
        for (const auto& o : j.at("objects")) {
          SceneObject so;
          so.category = o.at("category").get<std::string>();
          so.phrase = o.value("phrase", "the " + so.category);
          so.color = o.value("color", "");
          so.shape = o.value("shape", so.category);
          so.role = object_role_from_string(o.value("role", "distractor"));
          so.bbox = box_from(o.at("bbox"));
          so.centroid = {o.at("centroid").at(0).get<double>(), o.at("centroid").at(1).get<double>()};
          ep.objects.push_back(std::move(so));
        }
      }
      if (j.contains("arm") && !j["arm"].is_null()) ep.arm[frame] = box_from(j["arm"]);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(line_no, std::string("truth sidecar: ") + e.what());
    }
  }
  return idx;
}

TruthIndex TruthIndex::from_scenes(const std::vector<SyntheticScene>& scenes) {
  TruthIndex idx;
  for (const auto& s : scenes) {
    EpisodeTruth& ep = idx.episodes_[s.episode_id];
    ep.objects = s.objects;
    for (int t = 0; t < s.frames; ++t) {
      if (auto arm = s.arm_at(t)) ep.arm[t] = *arm;
    }
  }
  return idx;
}

const TruthIndex::EpisodeTruth* TruthIndex::episode(std::string_view id) const {
  auto it = episodes_.find(id);
  return it == episodes_.end() ? nullptr : &it->second;
}

const SceneObject* TruthIndex::object(std::string_view episode_id, std::string_view phrase) const {
  const EpisodeTruth* ep = episode(episode_id);
  if (!ep) return nullptr;
  const std::string key = phrase_key(phrase);
  for (const auto& o : ep->objects) {
    if (phrase_key(o.phrase) == key) return &o;
  }
  return nullptr;
}

std::optional<BBox> TruthIndex::arm(std::string_view episode_id, std::int64_t frame) const {
  const EpisodeTruth* ep = episode(episode_id);
  if (!ep) return std::nullopt;
  auto it = ep->arm.find(frame);
  if (it == ep->arm.end()) return std::nullopt;
  return it->second;
}

SceneFrameSource::SceneFrameSource(const std::vector<SyntheticScene>& scenes) {
  for (const auto& s : scenes) by_id_[s.episode_id] = &s;
}

cv::Mat SceneFrameSource::load(const Episode& episode, std::size_t position) {
  auto it = by_id_.find(episode.id);
  if (it == by_id_.end()) throw IoError("no synthetic scene for episode '" + episode.id + "'");
  return render_frame(*it->second, static_cast<int>(episode.frames.at(position).index));
}

}  // namespace interleaf

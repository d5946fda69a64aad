#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sys/stat.h>
#include <unistd.h>

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/manifest.hpp"
#include "interleaf/normalize.hpp"
#include "interleaf/rng.hpp"
#include "test_util.hpp"

using namespace interleaf;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

Episode make_episode(const std::string& id, int frames, rng::Stream& rs) {
  Episode e;
  e.id = id;
  e.source_dataset = "toy";
  e.instruction = "put the red block on the blue ball";
  for (int t = 0; t < frames; ++t) {
    Frame f;
    f.index = t;
    f.image_refs = {"img/" + std::to_string(t) + ".png"};
    for (std::size_t i = 0; i < kPoseDims; ++i) {
      f.proprio[i] = rs.uniform(-3, 3);
      f.action[i] = rs.uniform(-3, 3);
    }
    e.frames.push_back(f);
  }
  e.meta["split"] = "train";
  return e;
}

// Creates the image files every frame references.
void touch_images(const fs::path& dir, const DatasetManifest& m) {
  for (const auto& e : m.episodes)
    for (const auto& f : e.frames)
      for (const auto& r : f.image_refs) {
        fs::create_directories((dir / r).parent_path());
        std::ofstream(dir / r) << "x";
      }
}

DatasetManifest two_episode_fixture() {
  rng::Stream rs(3);
  DatasetManifest m;
  m.episodes.push_back(make_episode("ep1", 3, rs));
  m.episodes.push_back(make_episode("ep2", 2, rs));
  return m;
}

std::string manifest_text(const DatasetManifest& m) {
  std::string s = serialize_header(m) + "\n";
  for (const auto& e : m.episodes) s += serialize_episode(e) + "\n";
  return s;
}

}  // namespace

TEST(Manifest, TwoEpisodeRoundTrip) {
  TempDir dir;
  DatasetManifest m = two_episode_fixture();
  touch_images(dir.path(), m);
  write_manifest(m, dir / "m.jsonl");
  const DatasetManifest back = read_manifest(dir / "m.jsonl");
  ASSERT_EQ(back.episodes.size(), 2u);
  EXPECT_EQ(back, m);
}

TEST(Manifest, RewriteIsByteIdentical) {
  TempDir dir;
  DatasetManifest m = two_episode_fixture();
  m.stats = compute_norm_stats(m.episodes, "toy");
  touch_images(dir.path(), m);
  write_manifest(m, dir / "a.jsonl");
  write_manifest(read_manifest(dir / "a.jsonl"), dir / "b.jsonl");
  EXPECT_EQ(read_file(dir / "a.jsonl"), read_file(dir / "b.jsonl"));
}

TEST(Manifest, EmptyBodyHasHeaderOnly) {
  TempDir dir;
  write_manifest(DatasetManifest{}, dir / "e.jsonl");
  const auto lines = read_lines(dir / "e.jsonl");
  ASSERT_EQ(lines.size(), 1u);
  EXPECT_TRUE(read_manifest(dir / "e.jsonl").episodes.empty());
}

TEST(Manifest, DuplicateIdNamesTheId) {
  TempDir dir;
  DatasetManifest m = two_episode_fixture();
  m.episodes[1].id = "ep1";
  touch_images(dir.path(), m);
  std::ofstream(dir / "d.jsonl") << manifest_text(m);
  try {
    read_manifest(dir / "d.jsonl");
    FAIL() << "expected ManifestError";
  } catch (const ManifestError& e) {
    EXPECT_NE(std::string(e.what()).find("ep1"), std::string::npos);
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(write_manifest(m, dir / "w.jsonl"), ValidationError);
}

TEST(Manifest, SixEntryActionIsDimensionError) {
  rng::Stream rs(1);
  auto j = episode_to_json(make_episode("ep", 1, rs));
  EXPECT_NO_THROW(episode_from_json(j));
  j["frames"][0]["action"].erase(6);
  EXPECT_THROW(episode_from_json(j), DimensionError);
  const std::vector<double> six(6, 0.0);
  EXPECT_THROW(to_pose7(six, "action"), DimensionError);
}

TEST(Manifest, MalformedLineReportsLineNumber) {
  TempDir dir;
  DatasetManifest m = two_episode_fixture();
  touch_images(dir.path(), m);
  std::string text = serialize_header(m) + "\n" + serialize_episode(m.episodes[0]) + "\n{oops\n";
  std::ofstream(dir / "bad.jsonl") << text;
  try {
    read_manifest(dir / "bad.jsonl");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Manifest, DanglingImageAndMissingFile) {
  TempDir dir;
  DatasetManifest m = two_episode_fixture();
  std::ofstream(dir / "m.jsonl") << manifest_text(m);
  EXPECT_THROW(read_manifest(dir / "m.jsonl"), ManifestError);
  EXPECT_THROW(read_manifest(dir / "absent.jsonl"), IoError);
}

TEST(Manifest, ReadOnlyDirectoryLeavesNoFile) {
  if (::geteuid() == 0) GTEST_SKIP() << "permission bits are not enforced for root";
  TempDir dir;
  fs::create_directories(dir / "ro");
  fs::permissions(dir / "ro", fs::perms::owner_read | fs::perms::owner_exec);
  EXPECT_THROW(write_manifest(two_episode_fixture(), dir / "ro" / "m.jsonl"), IoError);
  fs::permissions(dir / "ro", fs::perms::owner_all);
  EXPECT_TRUE(fs::is_empty(dir / "ro"));
}

TEST(Manifest, UnwritableDestinationLeavesNoFile) {
  // Works as root too: the parent "directory" is a regular file.
  TempDir dir;
  std::ofstream(dir / "blocker") << "x";
  EXPECT_THROW(write_manifest(two_episode_fixture(), dir / "blocker" / "m.jsonl"), IoError);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir.path()), fs::directory_iterator()), 1);
}

TEST(Manifest, ParallelParseMatchesSequential) {
  // Above the parallel threshold; the parsed order must equal file order.
  TempDir dir;
  rng::Stream rs(11);
  DatasetManifest m;
  for (int i = 0; i < 700; ++i) m.episodes.push_back(make_episode("e" + std::to_string(i), 1, rs));
  for (auto& e : m.episodes) e.frames[0].image_refs = {"one.png"};
  std::ofstream(dir / "one.png") << "x";
  write_manifest(m, dir / "big.jsonl");
  EXPECT_EQ(read_manifest(dir / "big.jsonl"), m);
}

TEST(Episode, FrameInvariants) {
  rng::Stream rs(2);
  Episode e = make_episode("x", 3, rs);
  EXPECT_NO_THROW(validate_episode(e));
  Episode bad = e;
  bad.frames[2].index = 1;
  EXPECT_THROW(validate_episode(bad), ValidationError);
  bad = e;
  bad.frames[0].image_refs.clear();
  EXPECT_THROW(validate_episode(bad), ValidationError);
  bad = e;
  bad.frames.clear();
  EXPECT_THROW(validate_episode(bad), ValidationError);
}

TEST(IoUtil, Sha256AndBase64) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(base64_encode("hello"), "aGVsbG8=");
  EXPECT_EQ(base64_decode("aGVsbG8="), "hello");
  EXPECT_THROW(base64_decode("***"), ProtocolError);
  EXPECT_EQ(safe_file_stem("syn-000001"), "syn-000001");
  EXPECT_EQ(safe_file_stem("../etc").substr(0, 2), "h_");
}

// --- normalization ---

TEST(NormStats, TwoPointExtremes) {
  Episode e;
  e.id = "a";
  Frame f0, f1;
  f0.index = 0;
  f1.index = 1;
  f1.action.fill(2.0);
  f1.proprio.fill(1.0);
  e.frames = {f0, f1};
  const auto s = compute_norm_stats(std::span(&e, 1));
  for (std::size_t i = 0; i < kPoseDims; ++i) {
    EXPECT_EQ(s.min[i], 0.0);
    EXPECT_EQ(s.max[i], 2.0);
  }
}

TEST(NormStats, SingleFrameIsDegenerate) {
  rng::Stream rs(5);
  Episode e = make_episode("a", 1, rs);
  e.frames[0].proprio = e.frames[0].action;
  const auto s = compute_norm_stats(std::span(&e, 1));
  EXPECT_EQ(s.min, e.frames[0].action);
  EXPECT_EQ(s.max, e.frames[0].action);
  EXPECT_THROW(compute_norm_stats(std::span<const Episode>{}), ValidationError);
}

TEST(NormStats, MatchesRescanOfWrittenFileAndIgnoresOrder) {
  TempDir dir;
  rng::Stream rs(100);
  std::vector<Episode> eps;
  for (int i = 0; i < 100; ++i) eps.push_back(make_episode("e" + std::to_string(i), 5, rs));
  DatasetManifest m;
  m.episodes = eps;
  write_manifest(m, dir / "m.jsonl");

  // Oracle: scan the raw JSON lines directly.
  Pose7 lo, hi;
  lo.fill(1e300);
  hi.fill(-1e300);
  const auto lines = read_lines(dir / "m.jsonl");
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto j = nlohmann::json::parse(lines[k]);
    for (const auto& fr : j["frames"])
      for (const char* key : {"action", "proprio"})
        for (std::size_t i = 0; i < 7; ++i) {
          const double v = fr[key][i].get<double>();
          lo[i] = std::min(lo[i], v);
          hi[i] = std::max(hi[i], v);
        }
  }
  const auto s = compute_norm_stats(eps);
  EXPECT_EQ(s.min, lo);
  EXPECT_EQ(s.max, hi);

  std::reverse(eps.begin(), eps.end());
  std::rotate(eps.begin(), eps.begin() + 37, eps.end());
  const auto s2 = compute_norm_stats(eps);
  EXPECT_EQ(s2.min, s.min);
  EXPECT_EQ(s2.max, s.max);
}

TEST(Normalize, Examples) {
  NormalizationStats s;
  s.min.fill(0.0);
  s.max.fill(2.0);
  s.max[6] = 1.0;  // gripper
  Pose7 mid{1, 1, 1, 1, 1, 1, 0.5};
  for (double v : normalize_action(mid, s, Direction::Forward)) EXPECT_DOUBLE_EQ(v, 0.0);
  const Pose7 lo = normalize_action(s.min, s, Direction::Forward);
  const Pose7 hi = normalize_action(s.max, s, Direction::Forward);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(lo[i], -1.0);
    EXPECT_EQ(hi[i], 1.0);
  }
  // Degenerate dimension maps to 0 and back to min.
  s.min[2] = s.max[2] = 0.7;
  Pose7 x{0, 0, 0.7, 0, 0, 0, 0};
  EXPECT_EQ(normalize_action(x, s, Direction::Forward)[2], 0.0);
  EXPECT_EQ(normalize_action(Pose7{}, s, Direction::Inverse)[2], 0.7);
}

TEST(Normalize, ClampsAndCounts) {
  NormalizationStats s;
  s.min.fill(-1.0);
  s.max.fill(1.0);
  Pose7 x{5, -5, 0, 0, 0, 0, 0};
  std::size_t clamped = 0;
  const Pose7 y = normalize_action(x, s, Direction::Forward, &clamped);
  EXPECT_EQ(clamped, 2u);
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], -1.0);
  const std::vector<double> six(6, 0.0);
  EXPECT_THROW(normalize_action(std::span<const double>(six), s, Direction::Forward), DimensionError);
}

TEST(Normalize, PropertyRangeMonotoneInverse) {
  rng::Stream rs(42);
  for (int trial = 0; trial < 200; ++trial) {
    NormalizationStats s;
    for (std::size_t i = 0; i < 7; ++i) {
      const double a = rs.uniform(-10, 10), b = rs.uniform(-10, 10);
      s.min[i] = std::min(a, b);
      s.max[i] = std::max(a, b);
    }
    for (int k = 0; k < 50; ++k) {
      Pose7 a, b;
      for (std::size_t i = 0; i < 7; ++i) {
        a[i] = rs.uniform(s.min[i], s.max[i]);
        b[i] = rs.uniform(s.min[i], s.max[i]);
      }
      const Pose7 fa = normalize_action(a, s, Direction::Forward);
      const Pose7 fb = normalize_action(b, s, Direction::Forward);
      const Pose7 back = normalize_action(fa, s, Direction::Inverse);
      for (std::size_t i = 0; i < 7; ++i) {
        ASSERT_GE(fa[i], -1.0);
        ASSERT_LE(fa[i], 1.0);
        ASSERT_NEAR(back[i], a[i], 1e-9);
        if (a[i] <= b[i]) ASSERT_LE(fa[i], fb[i]);
      }
    }
  }
}

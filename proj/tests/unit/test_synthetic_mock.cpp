#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "interleaf/errors.hpp"
#include "interleaf/image_io.hpp"
#include "interleaf/instruction.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/manifest.hpp"
#include "interleaf/mock.hpp"
#include "interleaf/synthetic.hpp"
#include "test_util.hpp"

using namespace interleaf;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

SceneConfig small_cfg(int frames = 3) {
  SceneConfig c;
  c.frames = frames;
  return c;
}

}  // namespace

TEST(Synthetic, SetIsDeterministic) {
  TempDir a, b;
  const auto sa = generate_episode_set(12, small_cfg(), 7, a.path(), 2);
  const auto sb = generate_episode_set(12, small_cfg(), 7, b.path(), 1);
  EXPECT_EQ(read_file(sa.manifest_path), read_file(sb.manifest_path));
  EXPECT_EQ(read_file(sa.truth_path), read_file(sb.truth_path));
  EXPECT_EQ(read_file(a / "images/syn-000004/002.png"), read_file(b / "images/syn-000004/002.png"));
  EXPECT_EQ(read_lines(sa.truth_path).size(), 12u * 3u);
  EXPECT_EQ(sa.manifest.episodes.size(), 12u);
  EXPECT_THROW(generate_episode_set(0, small_cfg(), 7, a / "zero"), ValidationError);

  TempDir c;
  const auto sc = generate_episode_set(12, small_cfg(), 8, c.path(), 1);
  EXPECT_NE(read_file(sa.manifest_path), read_file(sc.manifest_path));
}

TEST(Synthetic, ManifestReadsBack) {
  TempDir a;
  const auto s = generate_episode_set(5, small_cfg(), 1, a.path());
  const auto m = read_manifest(s.manifest_path);
  EXPECT_EQ(m, s.manifest);
  for (const auto& e : m.episodes) {
    EXPECT_EQ(e.source_dataset, "synthetic");
    const cv::Mat img = load_image(m.resolve_image(e.frames[0].image_refs[0]));
    EXPECT_EQ(img.cols, 320);
    EXPECT_EQ(img.rows, 240);
  }
}

TEST(Synthetic, PropertyScenesAreWellFormed) {
  const auto scenes = generate_scenes(1000, small_cfg(), 7);
  ASSERT_EQ(scenes.size(), 1000u);
  const auto& lex = Lexicon::builtin();
  for (const auto& s : scenes) {
    const auto p = extract_key_objects(s.instruction, lex);
    ASSERT_EQ(p.phrases.size(), 2u) << s.instruction;
    ASSERT_EQ(p.phrases[0], s.pick().phrase);
    ASSERT_EQ(p.phrases[1], s.place().phrase);
    ASSERT_GE(s.distractor_count, 1);
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& o = s.objects[i];
      ASSERT_TRUE(o.bbox.valid());
      ASSERT_TRUE(o.bbox.within(s.width, s.height));
      ASSERT_TRUE(lex.is_noun(o.category));
      for (std::size_t j = i + 1; j < s.objects.size(); ++j)
        ASSERT_LE(iou(o.bbox, s.objects[j].bbox), 0.1);
    }
    for (const auto* key : {&s.pick(), &s.place()}) {
      bool other = false;
      for (const auto& o : s.objects)
        other |= o.role == ObjectRole::Distractor && o.category != key->category;
      ASSERT_TRUE(other);
    }
    ASSERT_FALSE(s.arm_at(0).has_value());
    ASSERT_TRUE(s.arm_at(1).has_value());
  }
}

TEST(Synthetic, ArmAbsentAtFrameZeroAndPresentLater) {
  const auto scene = make_scene(small_cfg(5), 3, "x");
  const cv::Mat f0 = render_frame(scene, 0);
  const cv::Mat f4 = render_frame(scene, 4);
  EXPECT_GT(cv::norm(f0, f4, cv::NORM_L1), 0.0);
  EXPECT_EQ(cv::norm(render_frame(scene, 0), f0, cv::NORM_L1), 0.0);
}

TEST(Truth, LoadMatchesScenes) {
  TempDir a;
  const auto set = generate_episode_set(6, small_cfg(), 2, a.path());
  const auto scenes = generate_scenes(6, small_cfg(), 2);
  const TruthIndex loaded = TruthIndex::load(set.truth_path);
  EXPECT_EQ(loaded.size(), 6u);
  for (const auto& s : scenes) {
    const auto* o = loaded.object(s.episode_id, "  The " + s.pick().color + "   " + s.pick().shape);
    ASSERT_NE(o, nullptr);
    EXPECT_EQ(o->bbox, s.pick().bbox);
    EXPECT_EQ(loaded.arm(s.episode_id, 2), s.arm_at(2));
  }
  std::ofstream(a / "bad.jsonl") << read_lines(set.truth_path)[0] << "\n{nope\n";
  try {
    TruthIndex::load(a / "bad.jsonl");
    FAIL();
  } catch (const ManifestError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Mock, PresetsAndCorrelationForJoint) {
  EXPECT_EQ(MockBackendConfig::preset("error-free").p_detect_fail, 0.0);
  const auto ind = MockBackendConfig::preset("independent");
  EXPECT_DOUBLE_EQ(ind.p_detect_fail, 0.174);
  EXPECT_DOUBLE_EQ(ind.p_verify_fail, 0.221);
  EXPECT_EQ(ind.correlation, 0.0);
  const auto cal = MockBackendConfig::preset("paper-calibrated");
  // P(both) = (1-c) p1 p2 + c min(p1, p2)
  EXPECT_NEAR((1 - cal.correlation) * 0.174 * 0.221 + cal.correlation * 0.174, 0.044, 1e-12);
  EXPECT_EQ(MockBackendConfig::preset("correlated").correlation, 1.0);
  EXPECT_THROW(MockBackendConfig::preset("nope"), ValidationError);
  MockBackendConfig bad;
  bad.p_detect_fail = 1.2;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Mock, PureFunctionOfKey) {
  const auto scenes = generate_scenes(20, small_cfg(), 4);
  const TruthIndex truth = TruthIndex::from_scenes(scenes);
  auto cfg = MockBackendConfig::preset("independent", 5);
  for (const auto& s : scenes) {
    DetectRequest req;
    req.image = cv::Mat(2, 2, CV_8UC3);
    req.phrases = {s.pick().phrase, s.place().phrase};
    req.context.episode_id = s.episode_id;
    req.context.frame = 0;
    const auto a = to_json(mock_detect(req, truth, cfg));
    // Request order and other phrases do not change a phrase's answer.
    std::swap(req.phrases[0], req.phrases[1]);
    const auto b = to_json(mock_detect(req, truth, cfg));
    ASSERT_EQ(a["detections"].size(), b["detections"].size());
    for (const auto& d : a["detections"]) {
      bool found = false;
      for (const auto& e : b["detections"]) found |= e == d;
      ASSERT_TRUE(found);
    }
    // Wire entry point answers the same as the typed call.
    ASSERT_EQ(mock_infer(RequestKind::Detect, to_json(req), truth, cfg), b);
  }
  EXPECT_THROW(mock_infer(RequestKind::Detect, nlohmann::json{{"phrases", 3}}, truth, cfg),
               ProtocolError);
  VerifyRequest vr;
  vr.image = cv::Mat(2, 2, CV_8UC3);
  vr.phrase = scenes[0].pick().phrase;
  vr.context.episode_id = scenes[0].episode_id;
  EXPECT_THROW(mock_verify(vr, truth, cfg), ProtocolError);
}

TEST(Mock, ParseReturnsTruthPhrases) {
  const auto scenes = generate_scenes(10, small_cfg(), 4);
  const TruthIndex truth = TruthIndex::from_scenes(scenes);
  for (const auto& s : scenes) {
    ParseRequest r{s.instruction, {s.episode_id, {}, {}}};
    const auto p = mock_parse(r, truth, {});
    ASSERT_EQ(p.objects, (std::vector<std::string>{s.pick().phrase, s.place().phrase}));
    ASSERT_EQ(p.template_text, "put {0} on {1}");
  }
}

TEST(Mock, FailureRatesAndIndependenceAtZeroCorrelation) {
  auto cfg = MockBackendConfig::preset("independent", 11);
  const int n = 20000;
  double sd = 0, sv = 0, sdv = 0;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_failures(cfg, "ep" + std::to_string(i / 2), i % 2 ? "a" : "b");
    sd += d.detect_fail;
    sv += d.verify_fail;
    sdv += d.detect_fail && d.verify_fail;
  }
  const double pd = sd / n, pv = sv / n, pdv = sdv / n;
  const double rho = (pdv - pd * pv) / std::sqrt(pd * (1 - pd) * pv * (1 - pv));
  EXPECT_LT(std::abs(rho), 0.02);
  EXPECT_NEAR(pd, 0.174, 0.01);
  EXPECT_NEAR(pv, 0.221, 0.01);

  cfg.correlation = 1.0;
  double both = 0;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_failures(cfg, "ep" + std::to_string(i), "x");
    both += d.detect_fail && d.verify_fail;
  }
  EXPECT_NEAR(both / n, 0.174, 0.005);
}

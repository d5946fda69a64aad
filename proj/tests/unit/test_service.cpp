#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "httplib.h"

#include "interleaf/rng.hpp"
#include "interleaf/config.hpp"
#include "interleaf/errors.hpp"
#include "interleaf/http_backend.hpp"
#include "interleaf/image_io.hpp"
#include "interleaf/mixture.hpp"
#include "interleaf/mock_server.hpp"
#include "test_util.hpp"

using namespace interleaf;
using testutil::TempDir;

namespace {

ClientConfig fast_client() {
  ClientConfig c;
  c.timeout_s = 5;
  c.retries = 2;
  c.backoff_initial_s = 0.01;
  c.backoff_max_s = 0.02;
  return c;
}

std::vector<SyntheticScene> scenes3() {
  SceneConfig c;
  c.frames = 2;
  return generate_scenes(3, c, 1);
}

}  // namespace

TEST(Http, RoundTripMatchesInProcessMock) {
  const auto scenes = scenes3();
  const TruthIndex truth = TruthIndex::from_scenes(scenes);
  const auto cfg = MockBackendConfig::preset("independent", 3);
  MockServer server(truth, cfg);
  server.start();
  HttpBackend http(Endpoints::all(server.base_url()), fast_client());
  MockBackend local(truth, cfg);

  const auto& s = scenes[0];
  DetectRequest dr;
  dr.image = render_frame(s, 0);
  dr.phrases = {s.pick().phrase, s.place().phrase};
  dr.context = {s.episode_id, 0, {}};
  EXPECT_EQ(to_json(http.detect(dr)), to_json(local.detect(dr)));

  VerifyRequest vr;
  vr.image = cv::Mat(8, 8, CV_8UC3, cv::Scalar(1, 1, 1));
  vr.phrase = s.pick().phrase;
  vr.context = {s.episode_id, 0, BBox{0, 0, 5, 5}};
  EXPECT_EQ(to_json(http.verify(vr)), to_json(local.verify(vr)));

  SegmentRequest sr;
  sr.image = dr.image;
  sr.keypoints = {s.pick().centroid};
  sr.context = {s.episode_id, 0, {}};
  const auto seg = http.segment(sr);
  ASSERT_TRUE(seg.bbox);
  EXPECT_EQ(*seg.bbox, s.pick().bbox);

  ParseRequest pr{s.instruction, {s.episode_id, {}, {}}};
  EXPECT_EQ(http.parse(pr).objects, local.parse(pr).objects);
  EXPECT_GE(server.requests(), 4u);
  server.stop();
}

TEST(Http, MissingProtocolHeaderIs400) {
  MockServer server(TruthIndex::from_scenes(scenes3()), {});
  const int port = server.start();
  httplib::Client cli("127.0.0.1", port);
  auto r = cli.Post("/v1/parse", R"({"instruction":"put the red block on the blue ball"})",
                    "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  httplib::Headers h{{kProtocolHeader, std::string(kProtocolVersion)}};
  r = cli.Post("/v1/detect", h, "{not json", "application/json");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 400);
  // A 4xx is not retried and surfaces as a protocol error.
  HttpBackend http(Endpoints::all(server.base_url()), fast_client());
  EXPECT_THROW(http.call(RequestKind::Detect, nlohmann::json{{"phrases", 1}}), ProtocolError);
  EXPECT_EQ(http.attempts(), 1u);
}

TEST(Http, RetriesTransientFailures) {
  MockServer server(TruthIndex::from_scenes(scenes3()), {});
  server.start();
  HttpBackend http(Endpoints::all(server.base_url()), fast_client());
  server.fail_next(2);  // two 503s, then success on the last retry
  ParseRequest pr{"put the red block on the blue ball", {}};
  EXPECT_NO_THROW(http.parse(pr));
  EXPECT_EQ(http.attempts(), 3u);
  server.fail_next(3);
  EXPECT_THROW(http.parse(pr), StageUnavailable);
}

TEST(Http, UnreachableIsStageUnavailable) {
  int port = 0;
  {
    MockServer probe(TruthIndex{}, {});
    port = probe.start();
  }
  HttpBackend http(Endpoints::all("http://127.0.0.1:" + std::to_string(port)), fast_client());
  EXPECT_THROW(http.parse(ParseRequest{"x", {}}), StageUnavailable);
  EXPECT_EQ(http.attempts(), 3u);
}

TEST(Http, ConcurrentCallers) {
  const auto scenes = scenes3();
  MockServer server(TruthIndex::from_scenes(scenes), {});
  server.start();
  auto client = fast_client();
  client.max_in_flight = 2;
  HttpBackend http(Endpoints::all(server.base_url()), client);
  std::vector<std::thread> ts;
  std::atomic<int> ok{0};
  for (int t = 0; t < 6; ++t) {
    ts.emplace_back([&] {
      for (int i = 0; i < 5; ++i) {
        SegmentRequest sr;
        sr.image = cv::Mat(4, 4, CV_8UC3);
        sr.keypoints = {scenes[1].place().centroid};
        sr.context = {scenes[1].episode_id, 0, {}};
        ok += http.segment(sr).bbox == scenes[1].place().bbox;
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(ok.load(), 30);
}

TEST(Wire, SchemaErrors) {
  EXPECT_THROW(detect_response_from_json(nlohmann::json{{"detections", {{{"phrase", "x"}}}}}),
               ProtocolError);
  EXPECT_THROW(bbox_from_json(nlohmann::json::array({1, 2, 3})), ProtocolError);
  EXPECT_THROW(image_from_base64("aGVsbG8="), ProtocolError);
  const auto sr = segment_response_from_json(nlohmann::json{{"bbox", nullptr}});
  EXPECT_FALSE(sr.bbox);
}

TEST(Endpoints, Validation) {
  EXPECT_NO_THROW(Endpoints::all("http://localhost:8080").validate());
  EXPECT_NO_THROW(Endpoints::all("https://models.example.org").validate());
  EXPECT_THROW(Endpoints::all("ftp://x").validate(), ValidationError);
  EXPECT_THROW(Endpoints::all("localhost:8080").validate(), ValidationError);
}

TEST(Config, DefaultsNeedBackend) {
  EXPECT_THROW(load_config(std::nullopt, {}), ValidationError);
  const auto c = load_config(std::nullopt, {{"mock_in_process", "true"}});
  EXPECT_TRUE(c.mock_in_process);
  EXPECT_EQ(c.workers, 1);
  EXPECT_EQ(c.failure_policy, FailurePolicy::KeepTextOnly);
  EXPECT_EQ(c.tokenizer.patch_count, 256u);
}

TEST(Config, StrictKeysAndRoundTrip) {
  TempDir dir;
  std::ofstream(dir / "c.json") << R"({"mock_in_process": true, "detection": {"score_treshold": 0.4}})";
  EXPECT_THROW(load_config(dir / "c.json", {}), ValidationError);
  std::ofstream(dir / "d.json") << R"({"mock_in_process": true, "workers": 0})";
  EXPECT_THROW(load_config(dir / "d.json", {}), ValidationError);

  auto c = load_config(std::nullopt, {{"mock_in_process", "true"}});
  c.detection.score_threshold = 0.25;
  c.augment = AugmentPolicy::preset("mixed", 4);
  c.mode = LocateMode::FirstFrame;
  const auto back = PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.digest(), c.digest());
}

TEST(Config, DigestIgnoresWorkersAndClient) {
  auto a = load_config(std::nullopt, {{"mock_in_process", "true"}});
  auto b = a;
  b.workers = 8;
  b.client.retries = 9;
  EXPECT_EQ(a.digest(), b.digest());
  b.seed = 1;
  EXPECT_NE(a.digest(), b.digest());
}

TEST(Config, EnvironmentOverrides) {
  ::setenv("INTERLEAF_MOCK_IN_PROCESS", "true", 1);
  ::setenv("INTERLEAF_DETECTION__SCORE_THRESHOLD", "0.45", 1);
  ::setenv("INTERLEAF_MODE", "first-frame", 1);
  ::setenv("INTERLEAF_LOG_LEVEL", "debug", 1);
  const auto ov = env_overrides();
  EXPECT_FALSE(ov.contains("log_level"));
  const auto c = load_config(std::nullopt);
  EXPECT_DOUBLE_EQ(c.detection.score_threshold, 0.45);
  EXPECT_EQ(c.mode, LocateMode::FirstFrame);
  ::unsetenv("INTERLEAF_MOCK_IN_PROCESS");
  ::unsetenv("INTERLEAF_DETECTION__SCORE_THRESHOLD");
  ::unsetenv("INTERLEAF_MODE");
  ::unsetenv("INTERLEAF_LOG_LEVEL");
  nlohmann::json doc = nlohmann::json::object();
  EXPECT_THROW(apply_overrides(doc, {{"a____b", "1"}}), ValidationError);
}

TEST(Mixture, OpenDataWeights) {
  const MixtureWeights w{{"RT-1", 41.01},
                         {"Bridge", 28.25},
                         {"BC-Z", 20.34},
                         {"Language Table", 7.81},
                         {"UTAustin Mutex", 0.71},
                         {"Jaco Play", 0.51},
                         {"Berkeley Autolab UR5", 0.47},
                         {"IAMLab CMU Pickup Insert", 0.30},
                         {"Stanford Hydra", 0.27},
                         {"UTAustin Sirius", 0.26},
                         {"UCSD Kitchen", 0.07}};
  const auto a = plan_mixture(w, 10000);
  std::uint64_t sum = 0;
  for (const auto& [k, v] : a) sum += v;
  EXPECT_EQ(sum, 10000u);
  EXPECT_EQ(a.at("RT-1"), 4101u);
}

TEST(Mixture, SmallCases) {
  EXPECT_EQ(plan_mixture({{"only", 1.0}}, 7).at("only"), 7u);
  const auto t = plan_mixture({{"a", 1}, {"b", 1}}, 3);
  EXPECT_EQ(t.at("a"), 2u);
  EXPECT_EQ(t.at("b"), 1u);
  EXPECT_THROW(plan_mixture({{"a", 0}, {"b", 0}}, 3), ValidationError);
  EXPECT_THROW(plan_mixture({{"a", -1}, {"b", 2}}, 3), ValidationError);
  EXPECT_EQ(plan_mixture({{"a", 1}}, 0).at("a"), 0u);
}

TEST(Mixture, PropertySumAndQuotaBounds) {
  rng::Stream rs(31);
  for (int t = 0; t < 2000; ++t) {
    MixtureWeights w;
    const auto k = rs.uniform_int(1, 12);
    double total_w = 0;
    for (int i = 0; i < k; ++i) {
      const double x = rs.bernoulli(0.2) ? 0.0 : rs.uniform(0, 10);
      w["d" + std::to_string(i)] = x;
      total_w += x;
    }
    if (total_w == 0) continue;
    const auto n = static_cast<std::uint64_t>(rs.uniform_int(0, 100000));
    const auto a = plan_mixture(w, n);
    std::uint64_t sum = 0;
    for (const auto& [label, v] : a) {
      const double quota = w.at(label) / total_w * static_cast<double>(n);
      ASSERT_GE(static_cast<double>(v), std::floor(quota) - 1e-6);
      ASSERT_LE(static_cast<double>(v), std::ceil(quota) + 1e-6);
      sum += v;
    }
    ASSERT_EQ(sum, n);
  }
}

TEST(Mixture, LoadFile) {
  TempDir dir;
  std::ofstream(dir / "w.json") << R"({"weights": {"x": 3, "y": 1}})";
  const auto w = load_mixture_weights(dir / "w.json");
  EXPECT_EQ(plan_mixture(w, 4).at("x"), 3u);
}

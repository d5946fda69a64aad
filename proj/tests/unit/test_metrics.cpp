#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "interleaf/errors.hpp"
#include "interleaf/io_util.hpp"
#include "interleaf/metrics.hpp"
#include "interleaf/rng.hpp"
#include "test_util.hpp"

using namespace interleaf;
using testutil::TempDir;
namespace fs = std::filesystem;

namespace {

ObjectResolution res(ResolutionStatus s) {
  ObjectResolution r;
  r.status = s;
  return r;
}

// Binomial CDF by direct summation in log space.
double binom_cdf(std::uint64_t x, std::uint64_t n, double p) {
  if (p <= 0) return 1.0;
  if (p >= 1) return x >= n ? 1.0 : 0.0;
  double sum = 0;
  for (std::uint64_t k = 0; k <= x; ++k) {
    const double lg = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                      k * std::log(p) + (n - k) * std::log1p(-p);
    sum += std::exp(lg);
  }
  return sum;
}

// Independent Clopper-Pearson oracle: bisection on the tail probabilities.
Interval cp_oracle(std::uint64_t x, std::uint64_t n, double alpha = 0.05) {
  Interval out{0.0, 1.0};
  if (x < n) {  // upper: P(X <= x; p) = alpha/2
    double lo = 0, hi = 1;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (binom_cdf(x, n, mid) > alpha / 2 ? lo : hi) = mid;
    }
    out.hi = 0.5 * (lo + hi);
  }
  if (x > 0) {  // lower: P(X >= x; p) = alpha/2
    double lo = 0, hi = 1;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (1.0 - binom_cdf(x - 1, n, mid) < alpha / 2 ? lo : hi) = mid;
    }
    out.lo = 0.5 * (lo + hi);
  }
  return out;
}

nlohmann::json episode_doc(const std::string& id, const std::vector<std::string>& statuses,
                           const std::vector<bool>& first_match) {
  nlohmann::json res = nlohmann::json::array();
  for (std::size_t i = 0; i < statuses.size(); ++i) {
    nlohmann::json trail = nlohmann::json::array();
    trail.push_back({{"stage", "detect"}, {"outcome", "boxes=1"}, {"frame", 0}, {"note", ""}});
    trail.push_back({{"stage", "verify"},
                     {"outcome", first_match[i] ? "match" : "mismatch"},
                     {"frame", 0},
                     {"note", ""}});
    if (!first_match[i]) {
      trail.push_back({{"stage", "segment"}, {"outcome", "mask"}, {"frame", 0}, {"note", ""}});
      trail.push_back({{"stage", "verify"},
                       {"outcome", statuses[i] == "REJECTED" ? "mismatch" : "match"},
                       {"frame", 0},
                       {"note", ""}});
    }
    res.push_back({{"phrase", "p" + std::to_string(i)},
                   {"status", statuses[i]},
                   {"first_verify_match", first_match[i]},
                   {"multi_instance", false},
                   {"trail", trail}});
  }
  bool failed = false;
  for (const auto& s : statuses) failed |= s == "REJECTED";
  return {{"episode_id", id},
          {"status", failed ? "FAILURE" : "SUCCESS"},
          {"zero_object", statuses.empty()},
          {"emitted", true},
          {"normalization_clamped", 0},
          {"resolutions", res}};
}

struct RandomRun {
  std::vector<nlohmann::json> docs;
};

RandomRun random_run(std::size_t episodes, std::uint64_t seed) {
  RandomRun r;
  rng::Stream rs(seed);
  for (std::size_t i = 0; i < episodes; ++i) {
    const auto k = static_cast<std::size_t>(rs.uniform_int(0, 3));
    std::vector<std::string> st;
    std::vector<bool> fm;
    for (std::size_t j = 0; j < k; ++j) {
      const double u = rs.uniform();
      fm.push_back(u < 0.8);
      st.push_back(u < 0.8 ? "ACCEPTED_DETECTOR" : u < 0.95 ? "ACCEPTED_SEGMENTER" : "REJECTED");
    }
    r.docs.push_back(episode_doc("ep" + std::to_string(i), st, fm));
  }
  return r;
}

void write_run(const fs::path& dir, const std::vector<nlohmann::json>& docs) {
  fs::create_directories(dir / "episodes");
  for (const auto& d : docs) {
    atomic_write_file(dir / "episodes" / (d["episode_id"].get<std::string>() + ".json"), d.dump());
  }
}

}  // namespace

TEST(EpisodeStatus, Examples) {
  const std::vector<ObjectResolution> ok{res(ResolutionStatus::AcceptedDetector),
                                         res(ResolutionStatus::AcceptedSegmenter)};
  EXPECT_EQ(episode_status(ok), EpisodeStatus::Success);
  const std::vector<ObjectResolution> bad{res(ResolutionStatus::AcceptedDetector),
                                          res(ResolutionStatus::Rejected)};
  EXPECT_EQ(episode_status(bad), EpisodeStatus::Failure);
  EXPECT_EQ(episode_status(std::span<const ObjectResolution>{}), EpisodeStatus::Success);
}

TEST(EpisodeStatus, PropertyMonotone) {
  rng::Stream rs(4);
  const ResolutionStatus all[] = {ResolutionStatus::AcceptedDetector,
                                  ResolutionStatus::AcceptedSegmenter, ResolutionStatus::Rejected};
  for (int t = 0; t < 2000; ++t) {
    std::vector<ObjectResolution> v;
    for (int i = 0, n = static_cast<int>(rs.uniform_int(1, 6)); i < n; ++i)
      v.push_back(res(all[rs.uniform_int(0, 2)]));
    const auto before = episode_status(v);
    auto& target = v[static_cast<std::size_t>(rs.uniform_int(0, v.size() - 1))];
    if (target.status != ResolutionStatus::Rejected) continue;
    target.status = rs.bernoulli(0.5) ? ResolutionStatus::AcceptedDetector
                                      : ResolutionStatus::AcceptedSegmenter;
    if (before == EpisodeStatus::Success) ASSERT_EQ(episode_status(v), EpisodeStatus::Success);
  }
}

TEST(ClopperPearson, ZeroOfTwoHundred) {
  const Interval ci = clopper_pearson(0, 200);
  EXPECT_EQ(ci.lo, 0.0);
  // Closed form at x = 0: 1 - (alpha/2)^(1/n).
  EXPECT_NEAR(ci.hi, 1.0 - std::pow(0.025, 1.0 / 200), 1e-12);
  EXPECT_NEAR(ci.hi, 0.0183, 5e-5);
}

TEST(ClopperPearson, MatchesBisectionOracle) {
  for (std::uint64_t n : {1u, 7u, 50u, 200u, 1000u}) {
    for (std::uint64_t x = 0; x <= n; x += std::max<std::uint64_t>(1, n / 13)) {
      const Interval a = clopper_pearson(x, n);
      const Interval b = cp_oracle(x, n);
      ASSERT_NEAR(a.lo, b.lo, 1e-9) << x << "/" << n;
      ASSERT_NEAR(a.hi, b.hi, 1e-9) << x << "/" << n;
      ASSERT_LE(a.lo, static_cast<double>(x) / n);
      ASSERT_GE(a.hi, static_cast<double>(x) / n);
    }
  }
  const Interval empty = clopper_pearson(0, 0);
  EXPECT_EQ(empty.lo, 0.0);
  EXPECT_EQ(empty.hi, 1.0);
}

TEST(Report, EmptyRunIsAllZero) {
  TempDir dir;
  fs::create_directories(dir / "episodes");
  const PipelineReport r = aggregate_report(dir.path());
  EXPECT_EQ(r.episodes_processed, 0u);
  EXPECT_EQ(r.objects(), 0u);
  EXPECT_EQ(r.detector_only.total, 0u);
  EXPECT_EQ(r.combined.total, 0u);
  EXPECT_EQ(r.detector_only.rate(), 0.0);
}

TEST(Report, CountsRatesAndCorruptFiles) {
  TempDir dir;
  write_run(dir.path(), {episode_doc("a", {"ACCEPTED_DETECTOR", "ACCEPTED_SEGMENTER"}, {true, false}),
                         episode_doc("b", {"REJECTED"}, {false}),
                         episode_doc("c", {}, {})});
  std::ofstream(dir / "episodes" / "zz.json") << "{broken";
  const PipelineReport r = aggregate_report(dir.path());
  EXPECT_EQ(r.episodes_processed, 3u);
  EXPECT_EQ(r.episodes_success, 2u);
  EXPECT_EQ(r.episodes_failure, 1u);
  EXPECT_EQ(r.episodes_zero_object, 1u);
  EXPECT_EQ(r.accepted_detector, 1u);
  EXPECT_EQ(r.accepted_segmenter, 1u);
  EXPECT_EQ(r.rejected, 1u);
  EXPECT_EQ(r.detector_only.hits, 1u);
  EXPECT_EQ(r.detector_only.total, 3u);
  EXPECT_EQ(r.combined.hits, 2u);
  ASSERT_EQ(r.corrupt_files.size(), 1u);
  EXPECT_EQ(r.episodes_processed, r.episodes_success + r.episodes_failure);
  const auto j = r.to_json();
  EXPECT_FALSE(j.contains("wall_clock_s"));
  EXPECT_EQ(PipelineReport::from_json(j), r);
  EXPECT_NE(r.to_text().find("3"), std::string::npos);
}

TEST(Report, PropertyShardMergeEqualsMonolithic) {
  rng::Stream rs(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto run = random_run(static_cast<std::size_t>(rs.uniform_int(0, 120)), 100 + trial);
    PipelineReport whole;
    for (const auto& d : run.docs) whole.add(EpisodeSummary::from_json(d));
    // Random contiguous shards, merged in shuffled order.
    std::vector<PipelineReport> shards;
    for (std::size_t i = 0; i < run.docs.size();) {
      const auto len = static_cast<std::size_t>(rs.uniform_int(1, 30));
      PipelineReport s;
      for (std::size_t k = i; k < std::min(run.docs.size(), i + len); ++k)
        s.add(EpisodeSummary::from_json(run.docs[k]));
      shards.push_back(s);
      i += len;
    }
    for (std::size_t i = shards.size(); i > 1; --i)
      std::swap(shards[i - 1], shards[static_cast<std::size_t>(rs.uniform_int(0, i - 1))]);
    PipelineReport merged;
    for (const auto& s : shards) merged.merge(s);
    ASSERT_EQ(merged, whole);
  }
  TempDir dir;
  const auto run = random_run(300, 55);
  write_run(dir.path(), run.docs);
  PipelineReport whole;
  for (const auto& d : run.docs) whole.add(EpisodeSummary::from_json(d));
  EXPECT_EQ(aggregate_report(dir.path()), whole);
}

TEST(Audit, CensusEqualsExactRate) {
  std::vector<std::pair<std::string, bool>> pop;
  for (int i = 0; i < 300; ++i) pop.emplace_back("e" + std::to_string(i), i % 25 == 0);
  const AuditSample s = sample_audit(pop, pop.size(), 3);
  EXPECT_EQ(s.failures, 12u);
  EXPECT_DOUBLE_EQ(s.estimate, 12.0 / 300);
  EXPECT_THROW(sample_audit(pop, 301, 3), ValidationError);
  EXPECT_THROW(sample_audit(pop, 0, 3), ValidationError);
}

TEST(Audit, WithoutReplacementAndDeterministic) {
  std::vector<std::pair<std::string, bool>> pop;
  for (int i = 0; i < 1000; ++i) pop.emplace_back("e" + std::to_string(i), false);
  const AuditSample a = sample_audit(pop, 200, 42);
  std::set<std::string> uniq(a.episode_ids.begin(), a.episode_ids.end());
  EXPECT_EQ(uniq.size(), 200u);
  EXPECT_EQ(sample_audit(pop, 200, 42).episode_ids, a.episode_ids);
  EXPECT_NEAR(a.interval.hi, 0.0183, 5e-5);
}

TEST(Audit, EstimatorUnbiasedAcrossSeeds) {
  std::vector<std::pair<std::string, bool>> pop;
  for (int i = 0; i < 5000; ++i) pop.emplace_back("e" + std::to_string(i), i % 1000 < 44);
  double sum = 0;
  const int seeds = 1000;
  for (int s = 0; s < seeds; ++s) sum += sample_audit(pop, 200, s).estimate;
  // Sampling sd of the mean: sqrt(p(1-p)/200 * fpc / 1000) ~ 4.5e-4.
  EXPECT_NEAR(sum / seeds, 0.044, 0.0025);
}

TEST(Audit, FromRunDirectory) {
  TempDir dir;
  write_run(dir.path(), random_run(250, 9).docs);
  const AuditSample s = sample_audit(dir.path(), 200, 1);
  EXPECT_EQ(s.population, 250u);
  EXPECT_EQ(s.episode_ids.size(), 200u);
  EXPECT_LE(s.interval.lo, s.estimate);
  EXPECT_GE(s.interval.hi, s.estimate);
}

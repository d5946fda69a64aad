// interleaf: convert text-instructed robot episodes into interleaved
// image-text episodes, plus the synthetic world and audit tooling.

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "interleaf/config.hpp"
#include "interleaf/errors.hpp"
#include "interleaf/metrics.hpp"
#include "interleaf/mixture.hpp"
#include "interleaf/mock_server.hpp"
#include "interleaf/pipeline.hpp"
#include "interleaf/synthetic.hpp"

namespace fs = std::filesystem;
using namespace interleaf;

namespace {

MockServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

void set_log_level(bool verbose, bool quiet) {
  if (const char* env = std::getenv("INTERLEAF_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(env));
  } else if (verbose) {
    spdlog::set_level(spdlog::level::debug);
  } else if (quiet) {
    spdlog::set_level(spdlog::level::warn);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interleaf: interleaved image-text episode generation"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  // convert
  auto* convert = app.add_subcommand("convert", "Convert a manifest into interleaved episodes");
  std::string input, out_dir, config_file, mode, failure_policy, augment_mode, pool, truth,
      mock_preset;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<double> mix_ratio, det_err, ver_err, corr;
  bool mock_in_process = false;
  convert->add_option("--input", input, "Input manifest (JSONL)")->required()->check(CLI::ExistingFile);
  convert->add_option("--out", out_dir, "Output directory")->required();
  convert->add_option("--config", config_file, "Config file (JSON)")->check(CLI::ExistingFile);
  convert->add_option("--workers", workers, "Parallel episode workers");
  convert->add_option("--seed", seed, "Global seed (augmentation and mock draws)");
  convert->add_option("--mode", mode, "dataset|first-frame");
  convert->add_option("--failure-policy", failure_policy, "keep-text-only|drop");
  convert->add_option("--augment", augment_mode, "internet-only|task-only|mixed");
  convert->add_option("--mix-ratio", mix_ratio, "Web image probability in mixed mode");
  convert->add_option("--pool", pool, "Web image pool directory");
  convert->add_flag("--mock-in-process", mock_in_process, "Use in-process mock backends");
  convert->add_option("--truth", truth, "Ground-truth sidecar for the mocks");
  convert->add_option("--mock-preset", mock_preset,
                      "error-free|independent|paper-calibrated|correlated");
  convert->add_option("--detector-error", det_err, "Mock detector failure probability");
  convert->add_option("--verifier-error", ver_err, "Mock verifier failure probability");
  convert->add_option("--correlation", corr, "Mock failure correlation");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic episode set");
  std::size_t count = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  SceneConfig scene;
  int synth_workers = 0;
  synth->add_option("--count", count, "Number of episodes")->required();
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--frames", scene.frames, "Frames per episode")->capture_default_str();
  synth->add_option("--width", scene.width, "Canvas width")->capture_default_str();
  synth->add_option("--height", scene.height, "Canvas height")->capture_default_str();
  synth->add_option("--workers", synth_workers, "Render threads (0 = all cores)");

  // mock-serve
  auto* serve = app.add_subcommand("mock-serve", "Serve mock backends over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string serve_truth, serve_preset;
  MockBackendConfig serve_cfg;
  serve->add_option("--port", port, "Port")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--truth", serve_truth, "Ground-truth sidecar")->required()->check(CLI::ExistingFile);
  serve->add_option("--preset", serve_preset, "error-free|independent|paper-calibrated|correlated");
  serve->add_option("--detector-error", serve_cfg.p_detect_fail, "p_detect_fail");
  serve->add_option("--verifier-error", serve_cfg.p_verify_fail, "p_verify_fail");
  serve->add_option("--correlation", serve_cfg.correlation, "Failure correlation in [0, 1]");
  serve->add_option("--seed", serve_cfg.seed, "Seed");

  // report
  auto* report = app.add_subcommand("report", "Aggregate a run directory");
  std::string run_dir;
  bool report_json = false;
  report->add_option("--run", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_flag("--json", report_json, "Print JSON instead of text");

  // audit
  auto* audit = app.add_subcommand("audit", "Sampled failure audit with exact 95% interval");
  std::string audit_run;
  std::size_t audit_n = 200;
  std::uint64_t audit_seed = 0;
  audit->add_option("--run", audit_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  audit->add_option("--n", audit_n, "Sample size")->capture_default_str();
  audit->add_option("--seed", audit_seed, "Seed");

  // mixture
  auto* mixture = app.add_subcommand("mixture", "Allocate episodes across source datasets");
  std::string weights_file;
  std::uint64_t total = 0;
  mixture->add_option("--weights", weights_file, "Weights file (JSON)")->required()->check(CLI::ExistingFile);
  mixture->add_option("--total", total, "Total episodes")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }
  set_log_level(verbose, quiet);

  try {
    if (*convert) {
      auto overrides = env_overrides();
      if (mock_in_process) overrides["mock_in_process"] = "true";
      PipelineConfig cfg = load_config(
          config_file.empty() ? std::nullopt : std::optional<fs::path>(config_file), overrides);
      if (workers) cfg.workers = *workers;
      if (seed) {
        cfg.seed = *seed;
        cfg.augment.seed = *seed;
        cfg.mock.seed = *seed;
      }
      if (!mode.empty()) cfg.mode = locate_mode_from_string(mode);
      if (!failure_policy.empty()) cfg.failure_policy = failure_policy_from_string(failure_policy);
      if (!augment_mode.empty()) {
        const double keep = cfg.augment.mix_ratio;
        cfg.augment = AugmentPolicy::preset(augment_mode, cfg.seed);
        if (cfg.augment.mode == AugmentMode::Mixed) cfg.augment.mix_ratio = keep;
      }
      if (mix_ratio) cfg.augment.mix_ratio = *mix_ratio;
      if (!pool.empty()) cfg.pool_root = pool;
      if (!truth.empty()) cfg.truth = truth;
      if (!mock_preset.empty()) {
        cfg.mock = MockBackendConfig::preset(mock_preset, cfg.mock.seed);
      }
      if (det_err) cfg.mock.p_detect_fail = *det_err;
      if (ver_err) cfg.mock.p_verify_fail = *ver_err;
      if (corr) cfg.mock.correlation = *corr;

      RunOptions opts;
      opts.progress = [](std::size_t done, std::size_t all) {
        if (done % 500 == 0 || done == all) spdlog::info("{}/{} episodes", done, all);
      };
      const RunResult r = run_convert(cfg, input, out_dir, opts);
      std::cout << r.report.to_text();
      if (r.exit_code != kExitOk) {
        std::cerr << "aborted: " << r.abort_reason << "\n"
                  << (r.exit_code == kExitResumable ? "rerun the same command to resume\n" : "");
      }
      return r.exit_code;
    }
    if (*synth) {
      const GeneratedSet set = generate_episode_set(count, scene, synth_seed, synth_out, synth_workers);
      std::cout << fmt::format("wrote {} episodes to {}\n  manifest: {}\n  truth:    {}\n",
                               set.manifest.episodes.size(), synth_out,
                               set.manifest_path.string(), set.truth_path.string());
      return kExitOk;
    }
    if (*serve) {
      MockBackendConfig cfg = serve_preset.empty() ? serve_cfg
                                                   : MockBackendConfig::preset(serve_preset, serve_cfg.seed);
      MockServer server(TruthIndex::load(serve_truth), cfg);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.listen(host, port);
      g_server = nullptr;
      return kExitOk;
    }
    if (*report) {
      const PipelineReport r = aggregate_report(run_dir);
      std::cout << (report_json ? r.to_json().dump(2) + "\n" : r.to_text());
      return kExitOk;
    }
    if (*audit) {
      const AuditSample s = sample_audit(fs::path(audit_run), audit_n, audit_seed);
      std::cout << fmt::format(
          "audited {} of {} episodes (seed {}): {} failures, estimate {:.2f}%, "
          "95% exact interval [{:.2f}%, {:.2f}%]\n",
          s.episode_ids.size(), s.population, s.seed, s.failures, 100.0 * s.estimate,
          100.0 * s.interval.lo, 100.0 * s.interval.hi);
      return kExitOk;
    }
    if (*mixture) {
      const MixtureAllocation alloc = plan_mixture(load_mixture_weights(weights_file), total);
      for (const auto& [label, n] : alloc) std::cout << fmt::format("{}\t{}\n", label, n);
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const StageUnavailable& e) {
    spdlog::error("{}", e.what());
    return kExitBackendUnavailable;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return kExitOk;
}

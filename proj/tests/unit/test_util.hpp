#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "interleaf/backend.hpp"

namespace testutil {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("interleaf-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

// Backend whose four calls are plain lambdas; unset ones throw.
struct ScriptedBackend : interleaf::ModelBackend {
  std::function<interleaf::ParseResponse(const interleaf::ParseRequest&)> on_parse;
  std::function<interleaf::DetectResponse(const interleaf::DetectRequest&)> on_detect;
  std::function<interleaf::VerifyResponse(const interleaf::VerifyRequest&)> on_verify;
  std::function<interleaf::SegmentResponse(const interleaf::SegmentRequest&)> on_segment;
  std::atomic<int> detect_calls{0}, verify_calls{0}, segment_calls{0};

  interleaf::ParseResponse parse(const interleaf::ParseRequest& r) override {
    if (!on_parse) throw std::logic_error("parse not scripted");
    return on_parse(r);
  }
  interleaf::DetectResponse detect(const interleaf::DetectRequest& r) override {
    ++detect_calls;
    if (!on_detect) throw std::logic_error("detect not scripted");
    return on_detect(r);
  }
  interleaf::VerifyResponse verify(const interleaf::VerifyRequest& r) override {
    ++verify_calls;
    if (!on_verify) throw std::logic_error("verify not scripted");
    return on_verify(r);
  }
  interleaf::SegmentResponse segment(const interleaf::SegmentRequest& r) override {
    ++segment_calls;
    if (!on_segment) throw std::logic_error("segment not scripted");
    return on_segment(r);
  }
};

}  // namespace testutil

#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

// Portable, platform-independent randomness. Every stochastic decision in the
// pipeline is a pure function of a seed and a string key so results do not
// depend on worker scheduling or the standard library's distribution code.
namespace interleaf::rng {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_string(std::string_view s, std::uint64_t seed = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

/// Derives a 64-bit key from a seed and an ordered list of string parts.
inline std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (auto part : parts) {
    h = hash_string(part, h);
  }
  return h;
}

/// Maps a 64-bit value to [0, 1) with 53 bits of precision.
constexpr double unit(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

/// Small sequential generator for bulk synthesis.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }
  double uniform() { return unit(next()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

}  // namespace interleaf::rng

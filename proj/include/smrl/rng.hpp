#pragma once

// Deterministic random number utilities. Every random draw in the project
// flows from a single 64-bit master seed through seed_chain(), so results
// are reproducible regardless of thread count or execution order. The
// generator and the mixing constants below are part of the reproducibility
// contract and must not change between releases.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace smrl {

// SplitMix64 output function (Steele, Lea & Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent substream seed from (seed, tag). Chain calls to mix
// in more than one tag: seed_chain(seed_chain(s, a), b).
constexpr std::uint64_t seed_chain(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ splitmix64(tag));
}

template <typename... Tags>
constexpr std::uint64_t seed_chain(std::uint64_t seed, std::uint64_t tag,
                                   Tags... rest) {
  return seed_chain(seed_chain(seed, tag), rest...);
}

// Counter-based SplitMix64 stream. Uniform and normal draws are built from
// the raw 64-bit stream with fixed arithmetic, so sequences are identical on
// every platform with IEEE doubles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Standard normal via Box-Muller (cosine branch). Consumes exactly two
  // uniforms per draw; no cached spare, so streams split cleanly.
  double normal() {
    double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n). Modulo bias is irrelevant for n << 2^64.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Fisher-Yates. std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

// Registry of substream tags fed to seed_chain. The values are part of the
// reproducibility contract and must stay fixed; add new tags at the end.
namespace seed_tags {
inline constexpr std::uint64_t kCollectActions = 1;
inline constexpr std::uint64_t kCollectReset = 2;
inline constexpr std::uint64_t kFitSplit = 3;
inline constexpr std::uint64_t kFitEpoch = 4;
inline constexpr std::uint64_t kFitInit = 5;
inline constexpr std::uint64_t kAgentInit = 6;
inline constexpr std::uint64_t kTrainSample = 7;
inline constexpr std::uint64_t kTrainReset = 8;
inline constexpr std::uint64_t kPpoShuffle = 9;
inline constexpr std::uint64_t kEvalReset = 10;
inline constexpr std::uint64_t kArmMfrl = 11;
inline constexpr std::uint64_t kArmSelfModel = 12;
inline constexpr std::uint64_t kArmRandom = 13;
inline constexpr std::uint64_t kModelReset = 14;
}  // namespace seed_tags

}  // namespace smrl

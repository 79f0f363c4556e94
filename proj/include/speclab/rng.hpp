#pragma once

// Counter-based deterministic random numbers.
//
// Every draw is a pure function of (seed, stream, counter):
//
//   key   = splitmix64(seed ^ splitmix64(stream))
//   bits  = splitmix64(key + (counter + 1) * 0x9E3779B97F4A7C15)
//   u     = (bits >> 11) * 2^-53                      in [0, 1)
//
// Standard normals use Box-Muller over the uniform pair at counters
// (2k, 2k + 1):  z_k = sqrt(-2 ln(1 - u_2k)) * cos(2 pi u_2k+1).
//
// No state is shared between streams, so any consumer can reproduce any
// draw from its coordinates alone.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

namespace speclab {

/// Named sub-streams. Values are part of the reproducibility contract.
enum class Stream : std::uint64_t {
  kTargetLogits = 1,
  kDraftNoise = 2,
  kDecode = 3,
  kPrompt = 4,
  kSuite = 5,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, Stream stream) noexcept
      : key_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(stream)))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return splitmix64(key_ + (counter + 1) * 0x9E3779B97F4A7C15ULL);
  }

  constexpr double uniform(std::uint64_t counter) const noexcept {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double normal(std::uint64_t index) const noexcept {
    const double u1 = 1.0 - uniform(2 * index);  // (0, 1]
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

template <class R>
concept UniformSource = requires(R& r) {
  { r.next() } -> std::convertible_to<double>;
};

/// Sequential view over one counter stream. Each decode owns one.
class UniformStream {
 public:
  explicit UniformStream(std::uint64_t seed, Stream stream = Stream::kDecode) noexcept
      : rng_(seed, stream) {}

  double next() noexcept { return rng_.uniform(counter_++); }

  std::uint64_t position() const noexcept { return counter_; }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

/// Uniforms replayed from a fixed list, then from a fallback stream. Used to
/// pin exact draw sequences in tests.
class ScriptedStream {
 public:
  explicit ScriptedStream(std::vector<double> draws) : draws_(std::move(draws)) {}

  double next() {
    if (pos_ < draws_.size()) return draws_[pos_++];
    ++pos_;
    return fallback_.next();
  }

 private:
  std::vector<double> draws_;
  std::size_t pos_ = 0;
  UniformStream fallback_{0};
};

}  // namespace speclab

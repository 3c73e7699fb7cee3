#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace bftt3d {

// SplitMix64 finalizer. Used both as the counter mixer of CounterRng and for
// deriving stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based generator: the i-th draw of a stream is mix64(key + i * golden),
// so output depends only on (key, draw index) and never on scheduling order.
// Distributions are implemented here rather than with <random> so results are
// identical across standard library implementations.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  // Key derived from a global seed, a stream name and an ordinal.
  CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t index) noexcept
      : CounterRng(mix64(seed ^ mix64(hash_name(stream) + mix64(index + 0x9e3779b97f4a7c15ULL)))) {}

  std::uint64_t next_u64() noexcept {
    return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Multiply-shift; bias is below 2^-64 * n.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller (one value per call, no caching).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace bftt3d

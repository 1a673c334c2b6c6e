#pragma once

// Counter-based SplitMix64.
//
// A stream is a 64-bit key plus a counter; draw i (1-based) is
//   mix64(key + i * 0x9E3779B97F4A7C15)
// where mix64 is the SplitMix64 finalizer (Steele, Lea & Flood 2014). With key = seed
// this reproduces the reference SplitMix64 sequence, e.g. seed 0 yields
// 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F.
//
// Child streams: split(id) keys a new stream with mix64(key ^ (id + 1) * 0xD1B54A32D192ED03),
// so independent consumers (per step, per operand) never share draws.
//
// Uniform doubles take the top 53 bits. Normals use Box-Muller on two uniform draws
// (cosine branch only), so each normal consumes exactly two counter values.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace adahop {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ull;
inline constexpr std::uint64_t kSplitKeyMul = 0xD1B54A32D192ED03ull;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit constexpr Rng(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept { return mix64(key_ + (++counter_) * kSplitMixGamma); }

  /// Random-access draw; does not advance the stream.
  constexpr std::uint64_t at(std::uint64_t index) const noexcept {
    return mix64(key_ + (index + 1) * kSplitMixGamma);
  }

  constexpr Rng split(std::uint64_t id) const noexcept { return Rng(mix64(key_ ^ ((id + 1) * kSplitKeyMul))); }

  /// Uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), via the 128-bit multiply-shift map.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double normal() noexcept {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// `count` distinct values from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    count = std::min(count, n);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(below(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace adahop

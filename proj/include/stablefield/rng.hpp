#pragma once

#include <cmath>
#include <cstdint>
#include <span>

namespace stablefield {

/// Seedable random stream with an explicit stream id, so parallel
/// realizations can draw from statistically independent sequences while
/// staying reproducible: equal (seed, stream) always yields the identical
/// sequence of draws on every platform.
///
/// The generator is PCG64 XSL-RR (128-bit LCG state, 64-bit output) with the
/// stream id folded into the increment. See kRngVersion in common.hpp.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(seed), stream_(stream) {
    const u128 initstate = (u128(mix64(seed ^ 0x9e3779b97f4a7c15ULL)) << 64) | mix64(seed);
    const u128 initseq = (u128(mix64(stream ^ 0xda3e39cb94b95bdbULL)) << 64) | mix64(stream);
    state_ = 0;
    inc_ = (initseq << 1) | 1;
    step();
    state_ += initstate;
    step();
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64() {
    const u128 old = state_;
    step();
    const std::uint64_t xored = static_cast<std::uint64_t>(old >> 64) ^ static_cast<std::uint64_t>(old);
    const unsigned rot = static_cast<unsigned>(old >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63u));
  }

  /// Uniform draw strictly inside (0,1); safe to feed into logs.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Exp(1) draw.
  double exponential() { return -std::log(uniform01()); }

  /// N(0,1) via Box-Muller. Consumes exactly two uniforms per call; the
  /// sine partner is discarded to keep the stream layout position-independent.
  double normal() {
    const double u = uniform01();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  void fill_normal(std::span<double> out) {
    for (double& x : out) x = normal();
  }

 private:
  using u128 = unsigned __int128;

  static std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void step() {
    // PCG64 default multiplier.
    constexpr u128 mult = (u128(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
    state_ = state_ * mult + inc_;
  }

  u128 state_ = 0;
  u128 inc_ = 1;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
};

}  // namespace stablefield

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace tdfdr {

namespace detail {

// SplitMix64 finalizer (Vigna). Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

} // namespace detail

//! Counter-based uniform random stream.
//!
//! Output word i is a pure function of (seed, stream, i), so every unit of
//! parallel work that owns its own stream draws an identical sequence no
//! matter how work is scheduled across threads. Jumping ahead is setting
//! the counter. Distinct stream ids give statistically independent
//! sequences for the same seed.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {
    key_ = detail::mix64(seed + detail::kGolden);
    key_ = detail::mix64(key_ ^ detail::mix64(stream + 0x6a09e667f3bcc909ULL));
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  //! Derive a child stream keyed by `id`. Children of distinct ids (or of
  //! distinct parents) are independent; used to hand one stream to each
  //! variable / repetition.
  RngStream child(std::uint64_t id) const noexcept {
    return RngStream(key_, id);
  }

  std::uint64_t next_u64() noexcept {
    return detail::mix64(key_ + (++counter_) * detail::kGolden);
  }

  //! Uniform on [0, 1) with 53 random bits.
  double next_double() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  //! Uniform on (0, 1]; safe as a log() argument.
  double next_double_open() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  //! Unbiased uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  bool next_coin() noexcept { return (next_u64() & 1u) != 0; }

  //! Standard normal via Box-Muller; consumes uniforms in pairs.
  double next_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = next_double_open();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  //! Gamma(shape, rate) via Marsaglia-Tsang squeeze; shape > 0, rate > 0.
  double next_gamma(double shape, double rate = 1.0) noexcept {
    if (shape < 1.0) {
      const double boost = std::pow(next_double_open(), 1.0 / shape);
      return next_gamma(shape + 1.0, rate) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_double_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v / rate;
    }
  }

  //! In-place Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      if (j != i - 1) std::swap(values[i - 1], values[j]);
    }
  }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

//! Spec-facing constructor name; identical to RngStream(seed, stream).
inline RngStream make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return RngStream(seed, stream);
}

} // namespace tdfdr

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace eegbio {

/// SplitMix64 finalizer (Steele, Lea & Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based 64-bit generator.
///
/// Draw i (0-based) of a stream with key k is mix64(k + (i + 1) * 0x9E3779B97F4A7C15),
/// i.e. SplitMix64 evaluated at an explicit counter. Any draw is addressable
/// without replaying the stream, and child streams are derived by hashing a
/// task index into the key, so parallel tasks never share state.
///
/// Derived distributions are specified here rather than delegated to <random>
/// so streams are identical across standard libraries:
///   uniform()       (u >> 11) * 2^-53, in [0, 1)
///   normal()        Box-Muller on two consecutive uniforms, cosine branch only
///   below(n)        rejection on the top of the 64-bit range, then modulo
class Rng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() noexcept {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  /// Child stream for task `index`; independent of how far this stream has advanced.
  Rng derive(std::uint64_t index) const noexcept {
    return Rng(mix64(key_ ^ mix64(index + kGolden)));
  }

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace eegbio

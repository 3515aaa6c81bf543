#pragma once

#include <ovt/common.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ovt {

/// Deterministic, cross-platform RNG: SplitMix64 stream plus cached
/// Box-Muller pair. Identical output for identical (seed, stream) on any
/// conforming platform; no std:: distribution facilities are used anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) : state_(mix(mix(seed) ^ mix(stream ^ 0x9e3779b97f4a7c15ull))) {}

  /// Derive a decorrelated child seed for a named substream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
    return mix(mix(seed) ^ mix(stream + 0x632be59bd9b4e019ull));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform on (0, 1]; never returns 0, so log() is always finite.
  double uniform01() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform01()));
    const double t = 2.0 * std::numbers::pi * uniform01();
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  Vector gaussian_vector(Index d) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v[i] = gaussian();
    return v;
  }

  Matrix gaussian_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  /// Uniform unit vector. Resamples on (astronomically unlikely) near-zero
  /// draws; gives up after 100 attempts.
  Vector unit_vector(Index d) {
    for (int attempt = 0; attempt < 100; ++attempt) {
      Vector v = gaussian_vector(d);
      const double nrm = v.norm();
      if (nrm > 1e-12) return v / nrm;
    }
    throw DegenerateSample("unit_vector: resample budget exhausted");
  }

  /// Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace ovt

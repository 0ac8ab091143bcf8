#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sann {

// Counter-based deterministic randomness. Every random object in the library
// is a pure function of (seed, counter), so partitions can be regenerated
// from their seed instead of being stored, and any coordinate of a random
// matrix can be produced in O(1).

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Independent stream seed for (seed, stream).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed + kGolden * (stream + 1)) ^ mix64(stream + 0x632BE59BD9B4E019ull);
}

// Uniform in (0, 1]; counter-indexed (splitmix64 stream at position `ctr`).
inline double u01_at(std::uint64_t seed, std::uint64_t ctr) {
  const std::uint64_t bits = mix64(seed + kGolden * (ctr + 1));
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

// Standard Gaussian at counter position k (Box-Muller, cosine branch).
inline double gaussian_at(std::uint64_t seed, std::uint64_t k) {
  const double u1 = u01_at(seed, 2 * k);
  const double u2 = u01_at(seed, 2 * k + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential generator for Monte Carlo loops. Deterministic given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  double uniform() { return u01_at(seed_, ctr_++); }

  std::uint64_t next_u64() { return mix64(seed_ + kGolden * (ctr_++ + 1)); }

  // u64 in [0, n) without modulo bias for the n we use (n << 2^64).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t ctr_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sann

#include "sann/euclidean_lsh.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "sann/rng.hpp"

namespace sann {

namespace {
constexpr std::uint64_t kOffsetStream = 0x0FF5E75ull;
}

GridPartitionSpec sample_grid_partition(std::uint32_t d, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("sample_grid_partition: d must be at least 2");
  GridPartitionSpec spec;
  spec.dim = d;
  spec.k = d;
  // E|<a, u-v>| = tau*sqrt(2/pi) per projection, so this width makes the
  // small-tau exponent k * sqrt(2/pi) * tau / width = tau * sqrt(d)
  spec.width = std::sqrt(2.0 / std::numbers::pi) * std::sqrt(static_cast<double>(d));
  spec.seed = seed;
  spec.projections.resize(spec.k);
  for (std::uint32_t j = 0; j < spec.k; ++j) {
    spec.projections[j].resize(d);
    for (std::uint32_t i = 0; i < d; ++i)
      spec.projections[j][i] = gaussian_at(seed, static_cast<std::uint64_t>(j) * d + i);
  }
  const std::uint64_t oseed = derive_seed(seed, kOffsetStream);
  spec.offsets.resize(spec.k);
  for (std::uint32_t j = 0; j < spec.k; ++j)
    spec.offsets[j] = spec.width * u01_at(oseed, j);
  return spec;
}

GridKey locate_grid(const GridPartitionSpec& spec, std::span<const double> p) {
  if (p.size() != spec.dim) throw std::invalid_argument("locate_grid: dimension mismatch");
  GridKey key(spec.k);
  for (std::uint32_t j = 0; j < spec.k; ++j) {
    const double s = dot(spec.projections[j], p) + spec.offsets[j];
    key[j] = static_cast<std::int64_t>(std::floor(s / spec.width));
  }
  return key;
}

CollisionEstimate estimate_grid_collision(double tau, std::uint32_t d,
                                          std::uint64_t trials, std::uint64_t seed,
                                          unsigned workers) {
  if (!(tau >= 0.0)) throw std::invalid_argument("estimate_grid_collision: tau must be >= 0");
  if (trials == 0) throw std::invalid_argument("estimate_grid_collision: trials must be positive");
  if (d < 2) throw std::invalid_argument("estimate_grid_collision: d must be at least 2");
  const double width = std::sqrt(2.0 / std::numbers::pi) * std::sqrt(static_cast<double>(d));
  const std::uint32_t k = d;
  if (workers == 0) workers = 1;
  // Fixed pair (0, tau*e1): only the first coordinate of each projection and
  // the offset decide the per-projection buckets, so each fresh spec reduces
  // to k (gaussian, uniform) pairs.
  // No early exit: every trial consumes exactly k draws so the same seed
  // yields coupled (common-random-numbers) streams across tau values.
  auto body = [tau, width, k](std::uint64_t wseed, std::uint64_t n) {
    Rng rng(wseed);
    std::uint64_t hits = 0;
    for (std::uint64_t t = 0; t < n; ++t) {
      bool collide = true;
      for (std::uint32_t j = 0; j < k; ++j) {
        const double a1 = rng.gaussian();
        const double b = width * rng.uniform();
        const std::int64_t ku = static_cast<std::int64_t>(std::floor(b / width));
        const std::int64_t kv =
            static_cast<std::int64_t>(std::floor((tau * a1 + b) / width));
        if (ku != kv) collide = false;
      }
      if (collide) ++hits;
    }
    return hits;
  };
  std::vector<std::uint64_t> hits(workers, 0), counts(workers, 0);
  for (unsigned w = 0; w < workers; ++w)
    counts[w] = trials / workers + (w < trials % workers ? 1 : 0);
  if (workers == 1) {
    hits[0] = body(derive_seed(seed, 0), counts[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] { hits[w] = body(derive_seed(seed, w), counts[w]); });
    for (auto& t : pool) t.join();
  }
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  CollisionEstimate e;
  e.trials = trials;
  e.p_hat = static_cast<double>(total) / static_cast<double>(trials);
  e.std_err = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(trials));
  return e;
}

}  // namespace sann

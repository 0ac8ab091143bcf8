#include "sann/spherical_lsh.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sann/rng.hpp"

namespace sann {

namespace {

constexpr double kUnitTol = 1e-6;

void check_unit(std::span<const double> u) {
  const double n = norm(u);
  if (std::abs(n - 1.0) > kUnitTol)
    throw std::invalid_argument("locate: input is not a unit vector");
}

// Splits `trials` over workers, runs fn(worker_seed, worker_trials) -> hits,
// returns the combined frequency. Reproducible for a fixed worker count.
template <typename Fn>
CollisionEstimate run_trials(std::uint64_t trials, std::uint64_t seed, unsigned workers,
                             Fn fn) {
  if (workers == 0) workers = 1;
  std::vector<std::uint64_t> hits(workers, 0);
  std::vector<std::uint64_t> counts(workers, 0);
  for (unsigned w = 0; w < workers; ++w)
    counts[w] = trials / workers + (w < trials % workers ? 1 : 0);
  if (workers == 1) {
    hits[0] = fn(derive_seed(seed, 0), counts[0]);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] { hits[w] = fn(derive_seed(seed, w), counts[w]); });
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

}  // namespace

SphericalPartitionSpec sample_partition(std::uint32_t d, std::uint32_t T,
                                        std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("sample_partition: d must be at least 2");
  if (T == 0) throw std::invalid_argument("sample_partition: T must be positive");
  SphericalPartitionSpec spec;
  spec.dim = d;
  spec.threshold = std::pow(static_cast<double>(d), 0.25);
  spec.seed = seed;
  spec.directions.resize(T);
  for (std::uint32_t i = 0; i < T; ++i) {
    spec.directions[i].resize(d);
    for (std::uint32_t j = 0; j < d; ++j)
      spec.directions[i][j] = gaussian_at(seed, static_cast<std::uint64_t>(i) * d + j);
  }
  spec.overflow_index = T;
  return spec;
}

std::uint32_t default_T(std::uint32_t d, double miss_bound) {
  if (!(miss_bound > 0.0 && miss_bound < 1.0))
    throw std::invalid_argument("default_T: miss_bound must be in (0,1)");
  const double lt = gaussian_tail_bounds(std::pow(static_cast<double>(d), 0.25)).lower;
  const double t = std::log(miss_bound) / std::log1p(-lt);
  return static_cast<std::uint32_t>(std::ceil(t));
}

std::uint32_t locate(const SphericalPartitionSpec& spec, std::span<const double> u) {
  check_unit(u);
  if (u.size() != spec.dim) throw std::invalid_argument("locate: dimension mismatch");
  for (std::uint32_t i = 0; i < spec.directions.size(); ++i)
    if (dot(spec.directions[i], u) >= spec.threshold) return i;
  return spec.overflow_index;
}

std::uint32_t locate(const LazySphericalPartition& spec, std::span<const double> u) {
  check_unit(u);
  if (u.size() != spec.dim) throw std::invalid_argument("locate: dimension mismatch");
  for (std::uint32_t i = 0; i < spec.T; ++i) {
    double s = 0.0;
    const std::uint64_t base = static_cast<std::uint64_t>(i) * spec.dim;
    for (std::uint32_t j = 0; j < spec.dim; ++j)
      s += gaussian_at(spec.seed, base + j) * u[j];
    if (s >= spec.threshold) return i;
  }
  return spec.T;
}

double predicted_log_inv_collision(double tau, std::uint32_t d) {
  if (!(tau > 0.0 && tau < 2.0))
    throw std::invalid_argument("predicted_log_inv_collision: tau must be in (0,2)");
  return tau * tau / (4.0 - tau * tau) * std::sqrt(static_cast<double>(d)) / 2.0;
}

CollisionEstimate estimate_pair_collision(double tau, std::uint32_t d,
                                          std::uint64_t trials, std::uint64_t seed,
                                          unsigned workers) {
  if (!(tau > 0.0 && tau < 2.0))
    throw std::invalid_argument("estimate_pair_collision: tau must be in (0,2)");
  if (trials < 100)
    throw std::invalid_argument("estimate_pair_collision: trials must be >= 100");
  const double lambda = std::pow(static_cast<double>(d), 0.25);
  // u, v live in a 2-D subspace: <u,g> = X, <v,g> = X cos(a) - Y sin(a) with
  // X, Y the independent Gaussian components of g in that plane.
  const double cosa = 1.0 - tau * tau / 2.0;
  const double sina = std::sqrt(std::max(0.0, 1.0 - cosa * cosa));
  return run_trials(trials, seed, workers,
                    [lambda, cosa, sina](std::uint64_t wseed, std::uint64_t n) {
                      Rng rng(wseed);
                      std::uint64_t hits = 0;
                      for (std::uint64_t t = 0; t < n; ++t) {
                        for (;;) {
                          const double x = rng.gaussian();
                          const double y = rng.gaussian();
                          const bool cu = x >= lambda;
                          const bool cv = x * cosa - y * sina >= lambda;
                          if (cu || cv) {
                            if (cu && cv) ++hits;
                            break;
                          }
                        }
                      }
                      return hits;
                    });
}

CollisionEstimate estimate_conditional_collision(double tau_uv, double tau_uw,
                                                 double tau_vw, std::uint32_t d,
                                                 std::uint64_t trials,
                                                 std::uint64_t seed, unsigned workers) {
  if (trials < 100)
    throw std::invalid_argument("estimate_conditional_collision: trials must be >= 100");
  auto ip = [](double tau) { return 1.0 - tau * tau / 2.0; };  // <a,b> at distance tau
  const double auv = ip(tau_uv), auw = ip(tau_uw), avw = ip(tau_vw);
  if (std::abs(auv) > 1.0 || std::abs(auw) > 1.0 || std::abs(avw) > 1.0)
    throw std::invalid_argument("estimate_conditional_collision: infeasible distances");
  // Embed u, v, w in R^3 with the prescribed Gram matrix.
  std::array<double, 3> u{1.0, 0.0, 0.0};
  std::array<double, 3> v{auv, std::sqrt(std::max(0.0, 1.0 - auv * auv)), 0.0};
  std::array<double, 3> w{auw, 0.0, 0.0};
  if (v[1] > 1e-12) {
    w[1] = (avw - auv * auw) / v[1];
  } else {
    // u == v: w must keep equal inner products with both
    if (std::abs(auw - avw) > 1e-9)
      throw std::invalid_argument("estimate_conditional_collision: infeasible Gram matrix");
    w[1] = 0.0;
  }
  const double rest = 1.0 - w[0] * w[0] - w[1] * w[1];
  if (rest < -1e-9)
    throw std::invalid_argument("estimate_conditional_collision: infeasible Gram matrix");
  w[2] = std::sqrt(std::max(0.0, rest));

  const double lambda = std::pow(static_cast<double>(d), 0.25);
  return run_trials(
      trials, seed, workers, [u, v, w, lambda](std::uint64_t wseed, std::uint64_t n) {
        Rng rng(wseed);
        std::uint64_t hits = 0;
        // accepted trial = first draw capturing any of the three captured both
        // u and v; record whether it captured w as well
        for (std::uint64_t accepted = 0; accepted < n;) {
          const double g0 = rng.gaussian();
          const double g1 = rng.gaussian();
          const double g2 = rng.gaussian();
          const bool cu = g0 * u[0] + g1 * u[1] + g2 * u[2] >= lambda;
          const bool cv = g0 * v[0] + g1 * v[1] + g2 * v[2] >= lambda;
          const bool cw = g0 * w[0] + g1 * w[1] + g2 * w[2] >= lambda;
          if (!(cu || cv || cw)) continue;
          if (cu && cv) {
            ++accepted;
            if (cw) ++hits;
          }
        }
        return hits;
      });
}

}  // namespace sann

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sann/geometry.hpp"

namespace sann {

// Partition of the unit sphere by iteratively carved caps
// {u : <u, g_i> >= dim^{1/4}}, g_i raw Gaussian directions. Points captured by
// no direction fall into the overflow part (index T).
struct SphericalPartitionSpec {
  std::uint32_t dim = 0;
  double threshold = 0.0;  // dim^{1/4}
  std::vector<std::vector<double>> directions;
  std::uint32_t overflow_index = 0;  // == directions.size()
  std::uint64_t seed = 0;
};

// Same partition without materialized directions; coordinates are regenerated
// from the seed on demand (directions[i][j] == gaussian_at(seed, i*dim+j)).
struct LazySphericalPartition {
  std::uint64_t seed = 0;
  std::uint32_t dim = 0;
  std::uint32_t T = 0;
  double threshold = 0.0;
};

struct CollisionEstimate {
  double p_hat = 0.0;
  std::uint64_t trials = 0;
  double std_err = 0.0;
};

SphericalPartitionSpec sample_partition(std::uint32_t d, std::uint32_t T,
                                        std::uint64_t seed);

// Smallest T with (1 - lower_tail(d^{1/4}))^T <= miss_bound.
std::uint32_t default_T(std::uint32_t d, double miss_bound = 1e-6);

// Smallest i with <u, g_i> >= threshold, else overflow. u must be unit.
std::uint32_t locate(const SphericalPartitionSpec& spec, std::span<const double> u);
std::uint32_t locate(const LazySphericalPartition& spec, std::span<const double> u);

// tau^2/(4 - tau^2) * sqrt(d)/2, the ideal ln(1/Pr[collision]) at distance tau.
double predicted_log_inv_collision(double tau, std::uint32_t d);

// Pr[both captured | either captured] for a fixed unit-sphere pair at
// distance tau, by conditioned Monte Carlo in the 2-D span of the pair.
CollisionEstimate estimate_pair_collision(double tau, std::uint32_t d,
                                          std::uint64_t trials, std::uint64_t seed,
                                          unsigned workers = 1);

// Pr[w captured | u,v captured at the first draw capturing any of the three]
// for a triangle (tau_uv, tau_uw, tau_vw) embedded in a 3-D subspace.
CollisionEstimate estimate_conditional_collision(double tau_uv, double tau_uw,
                                                 double tau_vw, std::uint32_t d,
                                                 std::uint64_t trials,
                                                 std::uint64_t seed,
                                                 unsigned workers = 1);

}  // namespace sann

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sann/geometry.hpp"
#include "sann/spherical_lsh.hpp"

namespace sann {

// Data-independent partition of R^d: k = d quantized Gaussian projections with
// bucket width calibrated so ln(1/collision) ~ tau*sqrt(d) for small tau.
struct GridPartitionSpec {
  std::uint32_t dim = 0;
  std::uint32_t k = 0;
  double width = 0.0;
  std::vector<std::vector<double>> projections;  // k x dim
  std::vector<double> offsets;                   // k, uniform in [0, width)
  std::uint64_t seed = 0;
};

using GridKey = std::vector<std::int64_t>;

GridPartitionSpec sample_grid_partition(std::uint32_t d, std::uint64_t seed);

GridKey locate_grid(const GridPartitionSpec& spec, std::span<const double> p);
inline GridKey locate_grid(const GridPartitionSpec& spec, const Point& p) {
  return locate_grid(spec, p.coords);
}

// Collision frequency over fresh partitions for a fixed pair at distance tau.
CollisionEstimate estimate_grid_collision(double tau, std::uint32_t d,
                                          std::uint64_t trials, std::uint64_t seed,
                                          unsigned workers = 1);

}  // namespace sann

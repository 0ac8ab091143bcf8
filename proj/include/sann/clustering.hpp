#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sann/geometry.hpp"

namespace sann {

// Ball/cap of at least min_count points around a data-point center.
struct DenseCluster {
  std::uint32_t center_id = 0;
  std::vector<std::uint32_t> members;  // sorted point ids, all within radius
  double radius = 0.0;
};

// Best data-point-centered ball holding >= min_count points: maximal member
// count, ties to the smallest center id. All-pairs exact counting.
std::optional<DenseCluster> find_dense_ball(std::span<const Point> points,
                                            double radius, std::uint32_t min_count);

// Same with centers restricted to the on-sphere points of `frame`.
std::optional<DenseCluster> find_dense_cap(std::span<const Point> points,
                                           const SphereFrame& frame, double cap_radius,
                                           std::uint32_t min_count);

// Data point u0 maximizing sum_u <u0, u> over unit points, and that sum.
std::pair<std::uint32_t, double> vdc_best_center(std::span<const Point> points);

// Near-linear variant: candidate centers found on a uniform sample, counts
// verified exactly against the full set (sound; sampling only affects
// completeness).
std::optional<DenseCluster> find_dense_cap_sampled(std::span<const Point> points,
                                                   const SphereFrame& frame,
                                                   double cap_radius,
                                                   std::uint32_t min_count,
                                                   std::uint32_t sample_size,
                                                   std::uint64_t seed);

// Ball analog of the sampled cap search, used by the index above its size
// threshold.
std::optional<DenseCluster> find_dense_ball_sampled(std::span<const Point> points,
                                                    double radius,
                                                    std::uint32_t min_count,
                                                    std::uint32_t sample_size,
                                                    std::uint64_t seed);

}  // namespace sann

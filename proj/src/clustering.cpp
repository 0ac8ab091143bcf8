#include "sann/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sann/rng.hpp"

namespace sann {

namespace {

constexpr double kMemberSlack = 1 + 1e-9;
constexpr double kSphereTol = 1e-6;

DenseCluster materialize(std::span<const Point> points, std::size_t center,
                         double radius) {
  DenseCluster c;
  c.center_id = points[center].id;
  c.radius = radius;
  for (const Point& p : points)
    if (distance(p.coords, points[center].coords) <= radius * kMemberSlack)
      c.members.push_back(p.id);
  std::sort(c.members.begin(), c.members.end());
  return c;
}

// Exhaustive best center among `centers` (indices into points).
std::optional<DenseCluster> best_center(std::span<const Point> points,
                                        std::span<const std::size_t> centers,
                                        double radius, std::uint32_t min_count) {
  std::size_t best = points.size();
  std::size_t best_count = 0;
  for (std::size_t ci : centers) {
    std::size_t count = 0;
    for (const Point& p : points)
      if (distance(p.coords, points[ci].coords) <= radius * kMemberSlack) ++count;
    const bool better =
        count > best_count ||
        (count == best_count && best < points.size() &&
         points[ci].id < points[best].id);
    if (count >= min_count && better) {
      best = ci;
      best_count = count;
    }
  }
  if (best == points.size()) return std::nullopt;
  return materialize(points, best, radius);
}

void check_on_sphere(std::span<const Point> points, const SphereFrame& frame) {
  for (const Point& p : points) {
    const double d = distance(p.coords, frame.center);
    if (std::abs(d - frame.radius) > kSphereTol * std::max(1.0, frame.radius))
      throw std::invalid_argument("find_dense_cap: point off the sphere");
  }
}

}  // namespace

std::optional<DenseCluster> find_dense_ball(std::span<const Point> points,
                                            double radius, std::uint32_t min_count) {
  if (radius <= 0.0) throw std::invalid_argument("find_dense_ball: radius must be positive");
  if (points.empty()) return std::nullopt;
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  return best_center(points, all, radius, min_count);
}

std::optional<DenseCluster> find_dense_cap(std::span<const Point> points,
                                           const SphereFrame& frame, double cap_radius,
                                           std::uint32_t min_count) {
  if (!(cap_radius > 0.0 && cap_radius < 2.0 * frame.radius))
    throw std::invalid_argument("find_dense_cap: cap_radius out of range");
  check_on_sphere(points, frame);
  if (points.empty()) return std::nullopt;
  std::vector<std::size_t> all(points.size());
  std::iota(all.begin(), all.end(), 0);
  return best_center(points, all, cap_radius, min_count);
}

std::pair<std::uint32_t, double> vdc_best_center(std::span<const Point> points) {
  if (points.empty()) throw std::invalid_argument("vdc_best_center: empty input");
  const std::size_t dim = points[0].coords.size();
  for (const Point& p : points)
    if (std::abs(norm(p.coords) - 1.0) > kSphereTol)
      throw std::invalid_argument("vdc_best_center: points must be unit vectors");
  // sum_u <u0,u> = <u0, s> with s the coordinate sum
  std::vector<double> s(dim, 0.0);
  for (const Point& p : points)
    for (std::size_t j = 0; j < dim; ++j) s[j] += p.coords[j];
  std::size_t best = 0;
  double best_score = dot(points[0].coords, s);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double sc = dot(points[i].coords, s);
    if (sc > best_score + 1e-12 ||
        (std::abs(sc - best_score) <= 1e-12 && points[i].id < points[best].id)) {
      best = i;
      best_score = std::max(sc, best_score);
    }
  }
  return {points[best].id, best_score};
}

namespace {

std::optional<DenseCluster> sampled_search(std::span<const Point> points, double radius,
                                           std::uint32_t min_count,
                                           std::uint32_t sample_size,
                                           std::uint64_t seed) {
  // uniform sample without replacement (partial Fisher-Yates)
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (std::uint32_t i = 0; i < sample_size; ++i)
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  idx.resize(sample_size);

  const double density = static_cast<double>(min_count) / static_cast<double>(points.size());
  const double sample_cut = density * sample_size / 2.0;
  std::vector<std::size_t> candidates;
  for (std::size_t a : idx) {
    std::size_t count = 0;
    for (std::size_t b : idx)
      if (distance(points[a].coords, points[b].coords) <= radius * kMemberSlack)
        ++count;
    if (static_cast<double>(count) >= sample_cut) candidates.push_back(a);
  }
  return best_center(points, candidates, radius, min_count);
}

}  // namespace

std::optional<DenseCluster> find_dense_cap_sampled(std::span<const Point> points,
                                                   const SphereFrame& frame,
                                                   double cap_radius,
                                                   std::uint32_t min_count,
                                                   std::uint32_t sample_size,
                                                   std::uint64_t seed) {
  if (sample_size < 32)
    throw std::invalid_argument("find_dense_cap_sampled: sample_size must be >= 32");
  if (!(cap_radius > 0.0 && cap_radius < 2.0 * frame.radius))
    throw std::invalid_argument("find_dense_cap_sampled: cap_radius out of range");
  check_on_sphere(points, frame);
  if (points.empty()) return std::nullopt;
  if (sample_size >= points.size())
    return find_dense_cap(points, frame, cap_radius, min_count);
  return sampled_search(points, cap_radius, min_count, sample_size, seed);
}

std::optional<DenseCluster> find_dense_ball_sampled(std::span<const Point> points,
                                                    double radius,
                                                    std::uint32_t min_count,
                                                    std::uint32_t sample_size,
                                                    std::uint64_t seed) {
  if (sample_size < 32)
    throw std::invalid_argument("find_dense_ball_sampled: sample_size must be >= 32");
  if (radius <= 0.0)
    throw std::invalid_argument("find_dense_ball_sampled: radius must be positive");
  if (points.empty()) return std::nullopt;
  if (sample_size >= points.size())
    return find_dense_ball(points, radius, min_count);
  return sampled_search(points, radius, min_count, sample_size, seed);
}

}  // namespace sann

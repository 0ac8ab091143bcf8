#include "sann/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sann/rng.hpp"

namespace sann {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - q[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double distance(const Point& p, const Point& q) { return distance(p.coords, q.coords); }

double project_between_spheres(double r1_sphere, double r2_sphere, double chord) {
  if (r1_sphere <= 0.0 || r2_sphere <= 0.0)
    throw std::invalid_argument("project_between_spheres: radii must be positive");
  const double dr = r1_sphere - r2_sphere;
  const double num = chord * chord - dr * dr;
  if (num < 0.0) throw std::invalid_argument("project_between_spheres: infeasible chord");
  return std::sqrt(r1_sphere * num / r2_sphere);
}

Point round_to_annulus(const Point& p, std::span<const double> center, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("round_to_annulus: delta must be positive");
  if (p.coords.size() != center.size())
    throw std::invalid_argument("round_to_annulus: dimension mismatch");
  Point out;
  out.id = p.id;
  out.coords.resize(p.coords.size());
  const double d = distance(p.coords, center);
  if (d <= delta * 1e-12) {
    // p sits on the center: park it at distance delta along the first axis
    std::copy(center.begin(), center.end(), out.coords.begin());
    out.coords[0] += delta;
    return out;
  }
  const double t = d / delta;
  double k = std::ceil(t - 1e-9 * std::max(1.0, t));
  if (k < 1.0) k = 1.0;
  const double f = delta * k / d;
  for (std::size_t i = 0; i < center.size(); ++i)
    out.coords[i] = center[i] + f * (p.coords[i] - center[i]);
  return out;
}

Ball cap_to_enclosing_ball(const SphereFrame& frame, const Point& cap_center,
                           double cap_radius) {
  const double R = frame.radius;
  if (R <= 0.0) throw std::invalid_argument("cap_to_enclosing_ball: radius must be positive");
  if (!(cap_radius > 0.0) || cap_radius >= 2.0 * R)
    throw std::invalid_argument("cap_to_enclosing_ball: cap_radius out of range");
  const double d = distance(cap_center.coords, frame.center);
  if (std::abs(d - R) > 1e-6 * R)
    throw std::invalid_argument("cap_to_enclosing_ball: cap_center off the sphere");
  const double ratio = cap_radius / R;
  double eta = (2.0 - ratio * ratio) / 2.0;
  eta = std::clamp(eta, -1.0, 1.0);
  Ball ball;
  ball.center.resize(frame.center.size());
  for (std::size_t i = 0; i < frame.center.size(); ++i) {
    const double xhat = (cap_center.coords[i] - frame.center[i]) / d;
    ball.center[i] = frame.center[i] + eta * R * xhat;
  }
  ball.radius = R * std::sqrt(std::max(0.0, 1.0 - eta * eta));
  return ball;
}

Ball smallest_enclosing_ball(std::span<const Point> points, double tol) {
  if (points.empty()) throw std::invalid_argument("smallest_enclosing_ball: empty input");
  if (tol <= 0.0) throw std::invalid_argument("smallest_enclosing_ball: tol must be positive");
  const std::size_t dim = points[0].coords.size();
  Ball ball;
  ball.center = points[0].coords;
  if (points.size() == 1) {
    ball.radius = 0.0;
    return ball;
  }
  const std::uint64_t iters =
      static_cast<std::uint64_t>(std::ceil(1.0 / (tol * tol)));
  for (std::uint64_t k = 1; k <= iters; ++k) {
    double best = -1.0;
    std::size_t far = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = distance(points[i].coords, ball.center);
      if (d > best) {
        best = d;
        far = i;
      }
    }
    const double step = 1.0 / static_cast<double>(k + 1);
    for (std::size_t j = 0; j < dim; ++j)
      ball.center[j] += step * (points[far].coords[j] - ball.center[j]);
  }
  double r = 0.0;
  for (const Point& p : points) r = std::max(r, distance(p.coords, ball.center));
  ball.radius = r;
  return ball;
}

std::vector<Point> jl_reduce(std::span<const Point> points, std::uint32_t target_d,
                             std::uint64_t seed) {
  if (target_d == 0) throw std::invalid_argument("jl_reduce: target_d must be positive");
  if (points.empty()) return {};
  const std::size_t dim = points[0].coords.size();
  if (target_d > dim) throw std::invalid_argument("jl_reduce: target_d exceeds dimension");
  // row-major target_d x dim matrix
  std::vector<double> mat(static_cast<std::size_t>(target_d) * dim);
  for (std::size_t i = 0; i < mat.size(); ++i) mat[i] = gaussian_at(seed, i);
  const double scale = 1.0 / std::sqrt(static_cast<double>(target_d));
  std::vector<Point> out;
  out.reserve(points.size());
  for (const Point& p : points) {
    if (p.coords.size() != dim) throw std::invalid_argument("jl_reduce: dimension mismatch");
    Point q;
    q.id = p.id;
    q.coords.resize(target_d);
    for (std::uint32_t r = 0; r < target_d; ++r) {
      double s = 0.0;
      const double* row = mat.data() + static_cast<std::size_t>(r) * dim;
      for (std::size_t j = 0; j < dim; ++j) s += row[j] * p.coords[j];
      q.coords[r] = s * scale;
    }
    out.push_back(std::move(q));
  }
  return out;
}

Point hamming_embed(const std::vector<bool>& bits, std::uint32_t id) {
  Point p;
  p.id = id;
  p.coords.resize(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) p.coords[i] = bits[i] ? 1.0 : 0.0;
  return p;
}

TailBounds gaussian_tail_bounds(double t) {
  if (!(t > 1.0)) throw std::invalid_argument("gaussian_tail_bounds: requires t > 1");
  const double phi = std::exp(-t * t / 2.0) / std::sqrt(2.0 * std::numbers::pi);
  TailBounds b;
  b.lower = phi * (1.0 / t - 1.0 / (t * t * t));
  b.upper = phi / t;
  return b;
}

}  // namespace sann

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sann {

struct Point {
  std::uint32_t id = 0;
  std::vector<double> coords;
};

// Sphere a sub-dataset lives on: all points at distance `radius` from `center`.
struct SphereFrame {
  std::vector<double> center;
  double radius = 0.0;
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;
};

// Bracket for Pr[N(0,1) >= t].
struct TailBounds {
  double lower = 0.0;
  double upper = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);
double distance(std::span<const double> p, std::span<const double> q);
double distance(const Point& p, const Point& q);

// Chord length on the R1-sphere after radially projecting a point of the
// concentric R2-sphere at chord distance r. Throws if r < |R1 - R2|.
double project_between_spheres(double r1_sphere, double r2_sphere, double chord);

// Push p outward along the ray from `center` so its distance becomes the next
// multiple of delta. p == center goes to distance delta along the first axis.
Point round_to_annulus(const Point& p, std::span<const double> center, double delta);

// Ball of center o + eta*R*x_hat and radius R*sqrt(1-eta^2) covering the cap
// {u on the sphere : |u - cap_center| <= cap_radius}, eta = (2-(cap_radius/R)^2)/2.
Ball cap_to_enclosing_ball(const SphereFrame& frame, const Point& cap_center,
                           double cap_radius);

// (1+tol)-approximate smallest enclosing ball (iterative center shift,
// ceil(1/tol^2) passes).
Ball smallest_enclosing_ball(std::span<const Point> points, double tol = 1e-3);

// Dense Gaussian projection scaled by 1/sqrt(target_d); ids preserved.
std::vector<Point> jl_reduce(std::span<const Point> points, std::uint32_t target_d,
                             std::uint64_t seed);

// 0/1 coordinates; squared Euclidean distance equals Hamming distance.
Point hamming_embed(const std::vector<bool>& bits, std::uint32_t id = 0);

// Two-sided bound on the standard Gaussian tail at t > 1.
TailBounds gaussian_tail_bounds(double t);

}  // namespace sann

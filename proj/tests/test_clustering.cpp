#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include <stdexcept>
#include "doctest.h"
#include "sann/clustering.hpp"
#include "sann/rng.hpp"

using namespace sann;

namespace {

// Independent all-pairs oracle with a different loop structure: distance
// matrix first, then the (count, id) argmax.
std::optional<DenseCluster> oracle_best(const std::vector<Point>& pts, double radius,
                                        std::uint32_t min_count) {
  const std::size_t n = pts.size();
  std::vector<std::vector<double>> dm(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) dm[i][j] = distance(pts[i], pts[j]);
  std::optional<std::size_t> best;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cnt = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (dm[i][j] <= radius * (1 + 1e-9)) ++cnt;
    if (cnt < min_count) continue;
    if (!best || cnt > best_count ||
        (cnt == best_count && pts[i].id < pts[*best].id)) {
      best = i;
      best_count = cnt;
    }
  }
  if (!best) return std::nullopt;
  DenseCluster c;
  c.center_id = pts[*best].id;
  c.radius = radius;
  for (std::size_t j = 0; j < n; ++j)
    if (dm[*best][j] <= radius * (1 + 1e-9)) c.members.push_back(pts[j].id);
  std::sort(c.members.begin(), c.members.end());
  return c;
}

std::vector<Point> sphere_points(Rng& rng, std::size_t n, std::uint32_t d, double R) {
  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].id = static_cast<std::uint32_t>(i);
    pts[i].coords.resize(d);
    double n2 = 0;
    for (auto& x : pts[i].coords) {
      x = rng.gaussian();
      n2 += x * x;
    }
    for (auto& x : pts[i].coords) x *= R / std::sqrt(n2);
  }
  return pts;
}

}  // namespace

TEST_SUITE("clustering") {

TEST_CASE("find_dense_ball: identical points form one cluster") {
  std::vector<Point> pts(8, Point{0, {1.0, 2.0, 3.0}});
  for (std::uint32_t i = 0; i < 8; ++i) pts[i].id = i;
  auto c = find_dense_ball(pts, 0.5, 8);
  REQUIRE(c.has_value());
  CHECK(c->members.size() == 8);
  CHECK(c->center_id == 0);
}

TEST_CASE("find_dense_ball: isolated points yield nothing") {
  std::vector<Point> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({std::uint32_t(i), {double(10 * i), 0.0}});
  CHECK(!find_dense_ball(pts, 2.0, 2).has_value());
  CHECK_THROWS_AS(find_dense_ball(pts, -1.0, 2), std::invalid_argument);
}

TEST_CASE("find_dense_ball matches the oracle on random instances") {
  Rng rng(61);
  for (int rep = 0; rep < 12; ++rep) {
    std::vector<Point> pts(200);
    for (int i = 0; i < 200; ++i) {
      pts[i].id = i;
      pts[i].coords = {rng.gaussian(), rng.gaussian(), rng.gaussian(),
                       rng.gaussian()};
    }
    const double radius = 1.0 + rng.uniform();
    const std::uint32_t min_count = 3 + static_cast<std::uint32_t>(rng.below(20));
    auto got = find_dense_ball(pts, radius, min_count);
    auto want = oracle_best(pts, radius, min_count);
    CHECK(got.has_value() == want.has_value());
    if (got && want) {
      CHECK(got->center_id == want->center_id);
      CHECK(got->members == want->members);
    }
  }
}

TEST_CASE("find_dense_cap: tiny cap holds everything; isolation holds nothing") {
  Rng rng(67);
  const std::uint32_t d = 8;
  // all points in a tiny cap: perturb one sphere point slightly and renormalize
  std::vector<Point> tight = sphere_points(rng, 1, d, 2.0);
  for (int i = 1; i < 10; ++i) {
    Point p = tight[0];
    p.id = i;
    p.coords[i % d] += 1e-3;
    double n2 = 0;
    for (double x : p.coords) n2 += x * x;
    for (auto& x : p.coords) x *= 2.0 / std::sqrt(n2);
    tight.push_back(p);
  }
  SphereFrame frame{std::vector<double>(d, 0.0), 2.0};
  auto all = find_dense_cap(tight, frame, 0.5, 10);
  REQUIRE(all.has_value());
  CHECK(all->members.size() == 10);

  // orthonormal-ish points are pairwise sqrt(2)*R apart: no cap of radius R
  std::vector<Point> ortho;
  for (std::uint32_t i = 0; i < d; ++i) {
    Point p{i, std::vector<double>(d, 0.0)};
    p.coords[i] = 2.0;
    ortho.push_back(p);
  }
  CHECK(!find_dense_cap(ortho, frame, 2.0, 2).has_value());

  std::vector<Point> off = ortho;
  off[0].coords[0] = 1.0;
  CHECK_THROWS_AS(find_dense_cap(off, frame, 1.0, 2), std::invalid_argument);
}

TEST_CASE("find_dense_cap matches the oracle on sphere instances") {
  Rng rng(71);
  SphereFrame frame{std::vector<double>(6, 0.0), 1.5};
  for (int rep = 0; rep < 10; ++rep) {
    auto pts = sphere_points(rng, 200, 6, 1.5);
    const double radius = (0.4 + rng.uniform()) * 1.5;
    const std::uint32_t min_count = 3 + static_cast<std::uint32_t>(rng.below(30));
    auto got = find_dense_cap(pts, frame, radius, min_count);
    auto want = oracle_best(pts, radius, min_count);
    CHECK(got.has_value() == want.has_value());
    if (got && want) {
      CHECK(got->center_id == want->center_id);
      CHECK(got->members == want->members);
    }
  }
}

TEST_CASE("vdc_best_center: degenerate configurations") {
  std::vector<Point> same(5, Point{0, {0, 1, 0}});
  for (std::uint32_t i = 0; i < 5; ++i) same[i].id = i;
  auto [id, score] = vdc_best_center(same);
  CHECK(score == doctest::Approx(5.0).epsilon(1e-9));

  std::vector<Point> anti{{7, {1, 0}}, {3, {-1, 0}}};
  auto [aid, ascore] = vdc_best_center(anti);
  CHECK(ascore == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(aid == 3);  // tie resolved to the smaller id
  CHECK_THROWS_AS(vdc_best_center({}), std::invalid_argument);
}

TEST_CASE("vdc_best_center: covered caps certify a good data center") {
  // points inside a cap of radius sqrt(2) - eps around a hidden u*, so
  // <u*, u> >= sqrt(2) eps - eps^2/2 >= eps; the best data center must score
  // at least eps^2 * n, and at least eps^2 n / 2 points sit within
  // <u0, u> >= eps^2 / 2
  Rng rng(73);
  const std::uint32_t d = 24;
  for (double eps : {0.1, 0.2, 0.4}) {
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> ustar(d);
      double n2 = 0;
      for (auto& x : ustar) {
        x = rng.gaussian();
        n2 += x * x;
      }
      for (auto& x : ustar) x /= std::sqrt(n2);
      const double cmin = std::numbers::sqrt2 * eps - eps * eps / 2;
      const std::size_t n = 100 + rng.below(157);
      std::vector<Point> pts(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double ct = cmin + (1 - cmin) * rng.uniform();
        const double st = std::sqrt(std::max(0.0, 1 - ct * ct));
        std::vector<double> v(d);
        for (auto& x : v) x = rng.gaussian();
        double pr = 0;
        for (std::uint32_t k = 0; k < d; ++k) pr += v[k] * ustar[k];
        double vn = 0;
        for (std::uint32_t k = 0; k < d; ++k) {
          v[k] -= pr * ustar[k];
          vn += v[k] * v[k];
        }
        vn = std::sqrt(vn);
        pts[i].id = static_cast<std::uint32_t>(i);
        pts[i].coords.resize(d);
        for (std::uint32_t k = 0; k < d; ++k)
          pts[i].coords[k] = ct * ustar[k] + st * v[k] / vn;
      }
      auto [center_id, score] = vdc_best_center(pts);
      CHECK(score >= eps * eps * double(n) - 1e-9);
      const Point* u0 = nullptr;
      for (const Point& p : pts)
        if (p.id == center_id) u0 = &p;
      std::size_t count = 0;
      for (const Point& p : pts)
        if (dot(u0->coords, p.coords) >= eps * eps / 2) ++count;
      CHECK(double(count) >= eps * eps * double(n) / 2);
    }
  }
}

TEST_CASE("find_dense_cap_sampled: exhaustive sample equals the exact search") {
  Rng rng(79);
  SphereFrame frame{std::vector<double>(8, 0.0), 1.0};
  auto pts = sphere_points(rng, 100, 8, 1.0);
  auto exact = find_dense_cap(pts, frame, 1.2, 5);
  auto sampled = find_dense_cap_sampled(pts, frame, 1.2, 5, 128, 555);
  CHECK(exact.has_value() == sampled.has_value());
  if (exact && sampled) {
    CHECK(exact->center_id == sampled->center_id);
    CHECK(exact->members == sampled->members);
  }
  CHECK_THROWS_AS(find_dense_cap_sampled(pts, frame, 1.2, 5, 8, 1),
                  std::invalid_argument);
}

TEST_CASE("find_dense_cap_sampled: planted cluster is found reliably") {
  const std::uint32_t d = 12;
  const std::size_t n = 2000;
  const double R = 1.0;
  int found = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(1000 + rep);
    SphereFrame frame{std::vector<double>(d, 0.0), R};
    // half the points inside one small data-point-centered cap
    auto pts = sphere_points(rng, n, d, R);
    const Point anchor = pts[0];
    for (std::size_t i = 1; i < n / 2; ++i) {
      for (std::uint32_t k = 0; k < d; ++k)
        pts[i].coords[k] = anchor.coords[k] + 0.05 * rng.gaussian();
      double n2 = 0;
      for (double x : pts[i].coords) n2 += x * x;
      for (auto& x : pts[i].coords) x *= R / std::sqrt(n2);
    }
    auto got = find_dense_cap_sampled(pts, frame, 0.5, n / 4, 400, 77 + rep);
    if (got && got->members.size() >= n / 4) ++found;
  }
  CHECK(double(found) / reps >= 0.99);
}

TEST_CASE("find_dense_cap_sampled: sparse instances return nothing") {
  const std::uint32_t d = 24;
  const std::size_t n = 1500;
  int none = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng(5000 + rep);
    SphereFrame frame{std::vector<double>(d, 0.0), 1.0};
    auto pts = sphere_points(rng, n, d, 1.0);
    // cap radius far below sqrt(2): neighbor counts stay tiny, verified by
    // the exact search at a quarter of the demanded count
    const double radius = 0.9;
    const std::uint32_t min_count = static_cast<std::uint32_t>(n / 4);
    REQUIRE(!find_dense_cap(pts, frame, radius, min_count / 4).has_value());
    if (!find_dense_cap_sampled(pts, frame, radius, min_count, 256, rep).has_value())
      ++none;
  }
  CHECK(double(none) / reps >= 0.99);
}

TEST_CASE("soundness and iterated removal") {
  Rng rng(83);
  auto pts = sphere_points(rng, 300, 5, 1.0);
  SphereFrame frame{std::vector<double>(5, 0.0), 1.0};
  std::vector<Point> remaining = pts;
  std::size_t prev = remaining.size() + 1;
  while (auto c = find_dense_cap(remaining, frame, 1.3, 4)) {
    CHECK(c->members.size() >= 4);
    const Point* center = nullptr;
    for (const Point& p : remaining)
      if (p.id == c->center_id) center = &p;
    REQUIRE(center != nullptr);
    for (std::uint32_t id : c->members) {
      const Point* m = nullptr;
      for (const Point& p : remaining)
        if (p.id == id) m = &p;
      REQUIRE(m != nullptr);
      CHECK(distance(m->coords, center->coords) <= 1.3 * (1 + 1e-9));
    }
    std::vector<Point> next;
    for (Point& p : remaining)
      if (!std::binary_search(c->members.begin(), c->members.end(), p.id))
        next.push_back(std::move(p));
    CHECK(next.size() < remaining.size());
    CHECK(remaining.size() < prev);
    prev = remaining.size();
    remaining = std::move(next);
    if (remaining.empty()) break;
  }
}

}  // TEST_SUITE

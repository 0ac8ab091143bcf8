#include <cmath>
#include <numbers>

#include <stdexcept>
#include "doctest.h"
#include "sann/euclidean_lsh.hpp"
#include "sann/rng.hpp"

using namespace sann;

TEST_SUITE("euclidean_lsh") {

TEST_CASE("sample_grid_partition: calibrated width and structure") {
  auto spec = sample_grid_partition(100, 7);
  CHECK(spec.k == 100);
  CHECK(spec.width ==
        doctest::Approx(std::sqrt(2.0 / std::numbers::pi) * 10.0).epsilon(1e-9));
  CHECK(spec.width == doctest::Approx(7.979).epsilon(1e-3));
  CHECK(spec.projections.size() == spec.k);
  CHECK(spec.offsets.size() == spec.k);
  for (double b : spec.offsets) {
    CHECK(b >= 0.0);
    CHECK(b < spec.width);
  }
  auto again = sample_grid_partition(100, 7);
  CHECK(spec.projections == again.projections);
  CHECK(spec.offsets == again.offsets);
  CHECK_THROWS_AS(sample_grid_partition(1, 7), std::invalid_argument);
}

TEST_CASE("locate_grid: key structure and translation shift") {
  auto spec = sample_grid_partition(16, 3);
  Rng rng(4);
  std::vector<double> p(16);
  for (auto& x : p) x = rng.gaussian();
  GridKey k1 = locate_grid(spec, p);
  GridKey k2 = locate_grid(spec, p);
  CHECK(k1 == k2);
  CHECK(k1.size() == 16);

  // shift p by width * a_j / |a_j|^2: component j moves exactly one bucket
  const std::uint32_t j = 5;
  double n2 = 0;
  for (double x : spec.projections[j]) n2 += x * x;
  std::vector<double> q(16);
  for (int i = 0; i < 16; ++i)
    q[i] = p[i] + spec.width * spec.projections[j][i] / n2;
  GridKey kq = locate_grid(spec, q);
  CHECK(kq[j] == k1[j] + 1);
  CHECK_THROWS_AS(locate_grid(spec, std::vector<double>(4, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("estimate_grid_collision: tau = 0 always collides") {
  auto e = estimate_grid_collision(0.0, 32, 500, 11);
  CHECK(e.p_hat == 1.0);
}

TEST_CASE("estimate_grid_collision: matches the closed-form exponent") {
  // per projection the pair collides with probability 1 - tau/sqrt(d) exactly
  // (up to an astronomically small clipping term), so
  // -ln p = -d ln(1 - tau/sqrt(d))
  const std::uint32_t d = 100;
  for (double tau : {0.05, 0.1, 0.2}) {
    const double expect = -100.0 * std::log1p(-tau / 10.0);
    auto e = estimate_grid_collision(tau, d, 40000, 17);
    const double got = -std::log(e.p_hat);
    CHECK(std::abs(e.p_hat - std::exp(-expect)) <= 5 * e.std_err);
    const double ratio = got / (tau * 10.0);
    CHECK(ratio >= 0.7);
    CHECK(ratio <= 1.4);
  }
  auto e01 = estimate_grid_collision(0.1, d, 40000, 17);
  CHECK(-std::log(e01.p_hat) == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("estimate_grid_collision: coupled draws are pointwise monotone") {
  double prev = 1.1;
  for (double tau : {0.05, 0.1, 0.2, 0.4}) {
    auto e = estimate_grid_collision(tau, 64, 20000, 23);
    CHECK(e.p_hat <= prev);
    prev = e.p_hat;
  }
}

TEST_CASE("grid collision stays positive at a tau comparable to the width") {
  // buckets are unbounded cells, so even far pairs collide sometimes
  auto e = estimate_grid_collision(1.0, 16, 20000, 29);
  CHECK(e.p_hat > 0.0);
}

}  // TEST_SUITE

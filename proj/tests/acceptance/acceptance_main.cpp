// Acceptance suite: one quantitative criterion per case, pinned thresholds.
// Prints one [PASS]/[FAIL] line per criterion; exit code is the failure count.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sann/harness.hpp"
#include "sann/rng.hpp"

using namespace sann;

namespace {

int failures = 0;

void report(int crit, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", crit,
              what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double now() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

unsigned workers() { return declared_workers(); }

// 1. Pairwise collision law: |(-ln p) - tau^2/(4-tau^2)*sqrt(d)/2| within
//    max(0.35*predicted, 3*std_err/p) at d=100, trials=1e5.
void criterion1() {
  const std::uint32_t d = 100;
  const std::uint64_t trials = 100000;
  const double t0 = now();
  bool all = true;
  std::string detail;
  for (double tau : {0.5, 1.0, std::numbers::sqrt2}) {
    CollisionEstimate e = estimate_pair_collision(tau, d, trials, 20250810, workers());
    const double pred = predicted_log_inv_collision(tau, d);
    const double ln_inv = -std::log(std::max(e.p_hat, 1e-300));
    const double tol = std::max(0.35 * pred, 3.0 * e.std_err / std::max(e.p_hat, 1e-300));
    const bool ok = std::abs(ln_inv - pred) <= tol;
    all = all && ok;
    char buf[160];
    std::snprintf(buf, sizeof buf, "tau=%.3f -ln(p)=%.3f predicted=%.3f tol=%.3f%s; ",
                  tau, ln_inv, pred, tol, ok ? "" : " OUT");
    detail += buf;
  }
  char t[48];
  std::snprintf(t, sizeof t, "%.1fs", now() - t0);
  report(1, all, "pairwise collision law within 35% of the ideal exponent",
         detail + t);
}

// 2. Three-point property at (1, sqrt2, sqrt2): conditional -ln p >= 4.0 and
//    exceeds the naive bound sqrt(d)/2 - predicted(1, d) by at least 0.3.
void criterion2() {
  const std::uint32_t d = 100;
  const double t0 = now();
  CollisionEstimate e = estimate_conditional_collision(
      1.0, std::numbers::sqrt2, std::numbers::sqrt2, d, 50000, 20250811, workers());
  const double ln_inv = -std::log(std::max(e.p_hat, 1e-300));
  const double naive = std::sqrt(double(d)) / 2.0 - predicted_log_inv_collision(1.0, d);
  const bool ok = ln_inv >= 4.0 && ln_inv >= naive + 0.3;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "-ln(p)=%.3f (need >= 4.0), naive=%.3f margin=%.3f (need >= 0.3), "
                "p=%.3g se=%.1g, %.1fs",
                ln_inv, naive, ln_inv - naive, e.p_hat, e.std_err, now() - t0);
  report(2, ok, "three-point conditional collision strictly beats the naive bound",
         buf);
}

// 3. Monotonicity: coupled pairwise estimates non-increasing over the tau
//    grid, zero inversions beyond 2 std errors.
void criterion3() {
  const std::uint32_t d = 100;
  const std::uint64_t trials = 100000;
  const double t0 = now();
  std::vector<CollisionEstimate> est;
  for (double tau = 0.25; tau <= 1.76; tau += 0.25)
    est.push_back(estimate_pair_collision(tau, d, trials, 20250812, workers()));
  int inversions = 0;
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    const double noise = 2.0 * std::sqrt(est[i].std_err * est[i].std_err +
                                         est[i + 1].std_err * est[i + 1].std_err);
    if (est[i + 1].p_hat > est[i].p_hat + noise) ++inversions;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "inversions=%d over 7-point grid, p(0.25)=%.3f p(1.75)=%.2g, %.1fs",
                inversions, est[0].p_hat, est.back().p_hat, now() - t0);
  report(3, inversions == 0, "pair collision non-increasing in tau", buf);
}

// 4. Grid partition calibration: -ln p / (tau sqrt(d)) in [0.7, 1.4].
void criterion4() {
  const std::uint32_t d = 100;
  bool all = true;
  std::string detail;
  for (double tau : {0.05, 0.1, 0.2}) {
    CollisionEstimate e = estimate_grid_collision(tau, d, 100000, 20250813, workers());
    const double ratio = -std::log(std::max(e.p_hat, 1e-300)) / (tau * 10.0);
    const bool ok = ratio >= 0.7 && ratio <= 1.4;
    all = all && ok;
    char buf[80];
    std::snprintf(buf, sizeof buf, "tau=%.2f ratio=%.3f%s; ", tau, ratio,
                  ok ? "" : " OUT");
    detail += buf;
  }
  report(4, all, "Euclidean grid exponent calibrated to tau*sqrt(d)", detail);
}

// 5. Project correctness: 2-D concentric-circle construction to 1e-9 over a
//    1000-case grid; Project(R, R, r) = r.
void criterion5() {
  Rng rng(20250814);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const double R1 = 0.2 + 4.8 * rng.uniform();
    const double R2 = 0.2 + 4.8 * rng.uniform();
    const double lo = std::abs(R1 - R2), hi = R1 + R2;
    const double r = lo + (hi - lo) * rng.uniform();
    const double cphi = (R1 * R1 + R2 * R2 - r * r) / (2 * R1 * R2);
    const double sphi = std::sqrt(std::max(0.0, 1 - cphi * cphi));
    const double expected = std::hypot(R1 * cphi - R1, R1 * sphi);
    if (std::abs(project_between_spheres(R1, R2, r) - expected) > 1e-9) ++bad;
  }
  int bad_id = 0;
  for (int t = 0; t < 1000; ++t) {
    const double R = 0.2 + 4.8 * rng.uniform();
    const double r = 2 * R * rng.uniform();
    if (std::abs(project_between_spheres(R, R, r) - r) > 1e-12 * std::max(1.0, r))
      ++bad_id;
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "construction mismatches=%d identity mismatches=%d",
                bad, bad_id);
  report(5, bad == 0 && bad_id == 0, "Project agrees with the 2-D construction", buf);
}

// 6. Shrinkage: 1000 random caps, each enclosing ball contains 1e4 sampled
//    cap points, radius/R <= sqrt(1 - eta^2) + 1e-9 < 1.
void criterion6() {
  Rng rng(20250815);
  const std::uint32_t d = 24;
  const double t0 = now();
  int containment_bad = 0, radius_bad = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    const double R = 0.5 + 2.5 * rng.uniform();
    Point cap_center{0, std::vector<double>(d)};
    {
      double n2 = 0;
      for (auto& x : cap_center.coords) {
        x = rng.gaussian();
        n2 += x * x;
      }
      for (auto& x : cap_center.coords) x *= R / std::sqrt(n2);
    }
    const double rho = (1e-3 + (1 - 2e-3) * rng.uniform()) * std::numbers::sqrt2 * R;
    SphereFrame frame{std::vector<double>(d, 0.0), R};
    Ball ball = cap_to_enclosing_ball(frame, cap_center, rho);
    const double eta = (2 - (rho / R) * (rho / R)) / 2;
    if (!(ball.radius / R <= std::sqrt(1 - eta * eta) + 1e-9 && ball.radius < R))
      ++radius_bad;
    const double cmin = 1 - rho * rho / (2 * R * R);
    for (int s = 0; s < 10000; ++s) {
      const double ct = cmin + (1 - cmin) * rng.uniform();
      const double st = std::sqrt(std::max(0.0, 1 - ct * ct));
      std::vector<double> v(d);
      for (auto& x : v) x = rng.gaussian();
      double pr = 0;
      for (std::uint32_t k = 0; k < d; ++k) pr += v[k] * cap_center.coords[k] / R;
      double vn = 0;
      for (std::uint32_t k = 0; k < d; ++k) {
        v[k] -= pr * cap_center.coords[k] / R;
        vn += v[k] * v[k];
      }
      vn = std::sqrt(vn);
      double dist2 = 0;
      for (std::uint32_t k = 0; k < d; ++k) {
        const double u = ct * cap_center.coords[k] + R * st * v[k] / vn;
        const double diff = u - ball.center[k];
        dist2 += diff * diff;
      }
      if (std::sqrt(dist2) > ball.radius * (1 + 1e-9)) {
        ++containment_bad;
        break;
      }
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "caps failing containment=%d radius bound=%d, %.1fs",
                containment_bad, radius_bad, now() - t0);
  report(6, containment_bad == 0 && radius_bad == 0,
         "cap-enclosing balls contain their caps and shrink", buf);
}

// 7. van der Corput consequence: 100 sets x 256 points x eps {0.1, 0.2, 0.4},
//    zero violations of count >= eps^2 n / 2.
void criterion7() {
  const double eps[] = {0.1, 0.2, 0.4};
  ExperimentReport rep = run_vdc_suite(100, 256, eps, 20250816);
  char buf[96];
  std::snprintf(buf, sizeof buf, "violations=%g worst_ratio=%.3f",
                rep.metrics.at("violations"), rep.metrics.at("worst_ratio"));
  report(7, rep.checks.at("zero_violations"),
         "data-point-centered caps certified on covered sets", buf);
}

// 8. Clustering oracle equivalence on 50 random 200-point instances.
void criterion8() {
  int mismatches = 0;
  for (int rep = 0; rep < 50; ++rep) {
    Rng rng(3000 + rep);
    const bool cap_case = rep % 2 == 1;
    std::vector<Point> pts(200);
    const std::uint32_t d = 6;
    const double R = 1.5;
    for (int i = 0; i < 200; ++i) {
      pts[i].id = i;
      pts[i].coords.resize(d);
      double n2 = 0;
      for (auto& x : pts[i].coords) {
        x = rng.gaussian();
        n2 += x * x;
      }
      if (cap_case)
        for (auto& x : pts[i].coords) x *= R / std::sqrt(n2);
    }
    const double radius = cap_case ? (0.4 + rng.uniform()) * R : 1.0 + rng.uniform();
    const std::uint32_t min_count = 3 + static_cast<std::uint32_t>(rng.below(25));
    std::optional<std::size_t> best;
    std::size_t best_count = 0;
    std::vector<std::vector<std::uint32_t>> members(200);
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 200; ++j)
        if (distance(pts[i], pts[j]) <= radius * (1 + 1e-9))
          members[i].push_back(pts[j].id);
      if (members[i].size() >= min_count &&
          (!best || members[i].size() > best_count ||
           (members[i].size() == best_count && pts[i].id < pts[*best].id))) {
        best = i;
        best_count = members[i].size();
      }
    }
    std::optional<DenseCluster> got;
    if (cap_case) {
      SphereFrame frame{std::vector<double>(d, 0.0), R};
      got = find_dense_cap(pts, frame, radius, min_count);
    } else {
      got = find_dense_ball(pts, radius, min_count);
    }
    const bool match =
        got.has_value() == best.has_value() &&
        (!got || (got->center_id == pts[*best].id && got->members == members[*best]));
    if (!match) ++mismatches;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "mismatches=%d of 50", mismatches);
  report(8, mismatches == 0, "exact dense-cluster search equals the O(n^2) oracle",
         buf);
}

// 9. End-to-end recall on the planted random instance.
void criterion9() {
  const double t0 = now();
  RandomInstance inst = gen_random_instance(2000, 256, 2.0, 1.0, 200, 20250817);
  BuildParams params;  // defaults
  ExperimentReport r12 = run_recall(inst, params, 12, workers());
  ExperimentReport r48 = run_recall(inst, params, 48, workers());
  const double recall12 = r12.metrics.at("recall");
  const double recall48 = r48.metrics.at("recall");
  const double cand = r12.metrics.at("mean_candidates");
  const double elapsed = now() - t0;
  const bool ok = recall12 >= 0.80 && recall48 >= 0.95 && cand <= 0.2 * 2000 &&
                  elapsed <= 600.0;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "recall@12=%.3f (>=0.80) recall@48=%.3f (>=0.95) "
                "mean_candidates=%.1f (<=400) total=%.0fs (<=600)",
                recall12, recall48, cand, elapsed);
  report(9, ok, "planted random-instance recall with bounded candidate work", buf);
}

// 10. Structural invariants: coverage, depth, gap ratios, bit-exact
//     serialization, determinism.
void criterion10() {
  ExperimentReport rep = run_selftest(20250818, workers());
  bool all = true;
  std::string detail;
  for (const auto& [name, ok] : rep.checks) {
    all = all && ok;
    if (!ok) detail += name + " FAILED; ";
  }
  if (detail.empty())
    detail = "coverage, depth, gap, replication, serialization, determinism, "
             "verified returns";
  report(10, all, "selftest structural invariants", detail);
}

// 11. Hamming reduction: embedded squared distances equal Hamming distances;
//     an index on embeddings returns only points within Hamming c*r.
void criterion11() {
  Rng rng(20250819);
  bool embed_ok = true;
  std::vector<std::uint64_t> words(512);
  for (auto& w : words) w = rng.next_u64();
  std::vector<Point> embedded(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::vector<bool> bits(64);
    for (int b = 0; b < 64; ++b) bits[b] = (words[i] >> b) & 1;
    embedded[i] = hamming_embed(bits, static_cast<std::uint32_t>(i));
  }
  for (int t = 0; t < 2000; ++t) {
    const std::size_t i = rng.below(words.size()), j = rng.below(words.size());
    const double d = distance(embedded[i], embedded[j]);
    if (std::abs(d * d - double(__builtin_popcountll(words[i] ^ words[j]))) > 1e-9) {
      embed_ok = false;
      break;
    }
  }

  // (c, r) in Hamming becomes thresholds (sqrt(r), sqrt(cr)) after embedding
  const double r_ham = 8.0, c_ham = 2.0;
  BuildParams params;
  params.r = std::sqrt(r_ham);
  params.c = std::sqrt(c_ham * r_ham) / std::sqrt(r_ham);  // sqrt(2)
  params.d_target = 64;                                    // keep distances exact
  PreparedDataset prep = prepare_dataset(embedded, params);
  Forest forest = build_forest(std::move(prep.indexed_points), prep.params, 8,
                               prep.meta, std::move(prep.verify_points), workers());
  int returned = 0, out_of_range = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t pick = rng.below(words.size());
    std::uint64_t w = words[pick];
    const int flips = static_cast<int>(rng.below(9));
    for (int f = 0; f < flips; ++f) w ^= 1ull << rng.below(64);
    std::vector<bool> bits(64);
    for (int b = 0; b < 64; ++b) bits[b] = (w >> b) & 1;
    const Point q = hamming_embed(bits);
    if (auto hit = query_forest(forest, q)) {
      ++returned;
      const int ham = __builtin_popcountll(words[*hit] ^ w);
      if (double(ham) > c_ham * r_ham) ++out_of_range;
    }
  }
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "embedding exact=%s, %d answers returned, %d beyond Hamming c*r",
                embed_ok ? "yes" : "NO", returned, out_of_range);
  report(11, embed_ok && out_of_range == 0 && returned > 0,
         "Hamming embedding and thresholded index stay within c*r", buf);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> which;
  for (int i = 1; i < argc; ++i) which.insert(std::atoi(argv[i]));
  auto want = [&](int k) { return which.empty() || which.count(k) > 0; };
  if (want(1)) criterion1();
  if (want(2)) criterion2();
  if (want(3)) criterion3();
  if (want(4)) criterion4();
  if (want(5)) criterion5();
  if (want(6)) criterion6();
  if (want(7)) criterion7();
  if (want(8)) criterion8();
  if (want(9)) criterion9();
  if (want(10)) criterion10();
  if (want(11)) criterion11();
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}

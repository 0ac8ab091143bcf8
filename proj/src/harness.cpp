#include "sann/harness.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "sann/rng.hpp"

namespace sann {

using nlohmann::json;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<double> random_unit(Rng& rng, std::uint32_t d) {
  std::vector<double> v(d);
  double n2 = 0.0;
  do {
    n2 = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      n2 += x * x;
    }
  } while (n2 <= 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (double& x : v) x *= inv;
  return v;
}

}  // namespace

RandomInstance gen_random_instance(std::uint32_t n, std::uint32_t d, double c, double r,
                                   std::uint32_t n_queries, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_random_instance: n must be >= 2");
  if (d < 16) throw std::invalid_argument("gen_random_instance: d must be >= 16");
  RandomInstance inst;
  inst.c = c;
  inst.r = r;
  inst.dim = d;
  inst.seed = seed;
  const double radius = c * r / std::numbers::sqrt2;
  Rng prng(derive_seed(seed, 1));
  inst.points.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    inst.points[i].id = i;
    inst.points[i].coords = random_unit(prng, d);
    for (double& x : inst.points[i].coords) x *= radius;
  }
  Rng qrng(derive_seed(seed, 2));
  inst.queries.resize(n_queries);
  inst.planted.resize(n_queries);
  for (std::uint32_t t = 0; t < n_queries; ++t) {
    const std::uint32_t pick = static_cast<std::uint32_t>(qrng.below(n));
    inst.planted[t] = pick;
    std::vector<double> dir = random_unit(qrng, d);
    const double rad = r * std::pow(qrng.uniform(), 1.0 / static_cast<double>(d));
    Point q;
    q.id = t;
    q.coords = inst.points[pick].coords;
    for (std::uint32_t j = 0; j < d; ++j) q.coords[j] += rad * dir[j];
    inst.queries[t] = std::move(q);
  }
  if (n_queries > 0) {
    std::uint64_t far = 0, total = 0;
    for (std::uint32_t t = 0; t < n_queries; ++t)
      for (std::uint32_t i = 0; i < n; ++i) {
        if (i == inst.planted[t]) continue;
        ++total;
        if (distance(inst.queries[t].coords, inst.points[i].coords) >=
            (c - 0.2) * r)
          ++far;
      }
    inst.far_fraction = static_cast<double>(far) / static_cast<double>(total);
  }
  return inst;
}

std::optional<std::uint32_t> brute_force_near(std::span<const Point> points,
                                              const Point& q, double threshold) {
  std::optional<std::uint32_t> best;
  double best_d = 0.0;
  for (const Point& p : points) {
    const double d = distance(p.coords, q.coords);
    if (!best || d < best_d || (d == best_d && p.id < *best)) {
      best = p.id;
      best_d = d;
    }
  }
  if (best && best_d <= threshold) return best;
  return std::nullopt;
}

bool ExperimentReport::all_checks_pass() const {
  for (const auto& [k, v] : checks)
    if (!v) return false;
  return true;
}

namespace {

json report_json(const ExperimentReport& rep, bool with_timings) {
  json j;
  j["run_id"] = rep.run_id;
  if (!rep.params_echo.empty()) j["params"] = json::parse(rep.params_echo);
  json metrics = json::object();
  for (const auto& [k, v] : rep.metrics) {
    if (!with_timings && k.rfind("time_", 0) == 0) continue;
    metrics[k] = v;
  }
  j["metrics"] = metrics;
  json checks = json::object();
  for (const auto& [k, v] : rep.checks) checks[k] = v;
  j["checks"] = checks;
  return j;
}

}  // namespace

std::string ExperimentReport::to_json() const { return report_json(*this, true).dump(2); }

std::string ExperimentReport::canonical_json() const {
  json j = report_json(*this, false);
  j["csv_rows"] = csv_rows;
  return j.dump();
}

void ExperimentReport::write(const std::string& json_path,
                             const std::string& csv_path) const {
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out) throw std::runtime_error("report: cannot open " + json_path);
    out << to_json() << "\n";
  }
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("report: cannot open " + csv_path);
    out << csv_header << "\n";
    for (const std::string& row : csv_rows) out << row << "\n";
  }
}

std::uint32_t jl_default_target(std::size_t n) {
  const double l = std::log2(std::max<double>(4.0, static_cast<double>(n)));
  const double t = l * std::log2(l + 2.0);
  return static_cast<std::uint32_t>(std::ceil(std::max(32.0, t)));
}

PreparedDataset prepare_dataset(std::span<const Point> original,
                                const BuildParams& raw) {
  raw.validate();
  if (original.empty()) throw std::invalid_argument("prepare_dataset: empty dataset");
  PreparedDataset out;
  out.params = raw;
  out.params.r = 1.0;
  out.meta.orig_dim = static_cast<std::uint32_t>(original[0].coords.size());
  out.meta.scale = 1.0 / raw.r;
  std::vector<Point> scaled(original.begin(), original.end());
  if (out.meta.scale != 1.0)
    for (Point& p : scaled)
      for (double& x : p.coords) x *= out.meta.scale;
  const std::uint32_t target =
      raw.d_target == 0 ? jl_default_target(original.size()) : raw.d_target;
  if (target < out.meta.orig_dim) {
    out.meta.jl_seed = derive_seed(raw.seed, 0x11AAull);
    out.meta.indexed_dim = target;
    out.indexed_points = jl_reduce(scaled, target, out.meta.jl_seed);
    out.verify_points = std::move(scaled);
  } else {
    out.meta.jl_seed = 0;
    out.meta.indexed_dim = out.meta.orig_dim;
    out.indexed_points = std::move(scaled);
    out.verify_points = out.indexed_points;
  }
  return out;
}

ExperimentReport run_recall(const RandomInstance& instance, const BuildParams& params,
                            std::uint32_t num_trees, unsigned workers) {
  ExperimentReport rep;
  rep.run_id = "recall";
  BuildParams raw = params;
  raw.c = instance.c;
  raw.r = instance.r;
  json echo;
  echo["n"] = instance.points.size();
  echo["d"] = instance.dim;
  echo["c"] = instance.c;
  echo["r"] = instance.r;
  echo["num_trees"] = num_trees;
  echo["seed"] = raw.seed;
  echo["workers"] = workers;
  rep.params_echo = echo.dump();

  const double t0 = now_seconds();
  PreparedDataset prep = prepare_dataset(instance.points, raw);
  Forest forest =
      build_forest(std::move(prep.indexed_points), prep.params, num_trees, prep.meta,
                   std::move(prep.verify_points), workers);
  const double t1 = now_seconds();

  const double cr = instance.c * instance.r;
  rep.csv_header =
      "query,planted,returned,orig_dist,success,candidates,nodes,ball_depth";
  std::uint64_t hits = 0, denom = 0;
  double sum_cand = 0.0, sum_nodes = 0.0;
  std::vector<std::string> rows(instance.queries.size());

  auto run_query = [&](std::size_t qi) {
    const Point& q = instance.queries[qi];
    QueryStats stats;
    const auto hit = query_forest(forest, q, &stats);
    double orig_dist = -1.0;
    bool success = false;
    if (hit) {
      // ids are positions in the instance; measure in the original space
      orig_dist = distance(instance.points.at(*hit).coords, q.coords);
      success = orig_dist <= cr;
    }
    std::ostringstream row;
    row << qi << "," << instance.planted[qi] << ","
        << (hit ? static_cast<std::int64_t>(*hit) : -1) << "," << fmt(orig_dist) << ","
        << (success ? 1 : 0) << "," << stats.candidates_examined << ","
        << stats.nodes_visited << "," << stats.ball_depth_max;
    rows[qi] = row.str();
    return std::tuple{success, stats.candidates_examined, stats.nodes_visited};
  };

  const double t2 = now_seconds();
  for (std::size_t qi = 0; qi < instance.queries.size(); ++qi) {
    // ground truth: every query must have an r-near neighbor by construction
    if (brute_force_near(instance.points, instance.queries[qi], instance.r)) ++denom;
    auto [success, cand, nodes] = run_query(qi);
    if (success) ++hits;
    sum_cand += static_cast<double>(cand);
    sum_nodes += static_cast<double>(nodes);
  }
  const double t3 = now_seconds();

  rep.csv_rows = std::move(rows);
  const double nq = static_cast<double>(instance.queries.size());
  rep.metrics["recall"] = denom ? static_cast<double>(hits) / static_cast<double>(denom) : 0.0;
  rep.metrics["queries_with_near"] = static_cast<double>(denom);
  rep.metrics["mean_candidates"] = sum_cand / nq;
  rep.metrics["mean_nodes_visited"] = sum_nodes / nq;
  rep.metrics["num_trees"] = num_trees;
  rep.metrics["indexed_dim"] = forest.meta.indexed_dim;
  rep.metrics["time_build_seconds"] = t1 - t0;
  rep.metrics["time_query_microseconds"] = (t3 - t2) * 1e6 / nq;
  return rep;
}

ExperimentReport run_collision_suite(std::uint32_t d, std::uint64_t trials,
                                     std::uint64_t seed, unsigned workers) {
  ExperimentReport rep;
  rep.run_id = "collisions";
  json echo;
  echo["d"] = d;
  echo["trials"] = trials;
  echo["seed"] = seed;
  echo["workers"] = workers;
  rep.params_echo = echo.dump();
  rep.csv_header = "family,tau_uv,tau_uw,tau_vw,d,p_hat,std_err,predicted_ln_inv";

  auto add_row = [&](const std::string& fam, double tuv, double tuw, double tvw,
                     const CollisionEstimate& e, double pred) {
    std::ostringstream os;
    os << fam << "," << fmt(tuv) << "," << fmt(tuw) << "," << fmt(tvw) << "," << d << ","
       << fmt(e.p_hat) << "," << fmt(e.std_err) << "," << fmt(pred);
    rep.csv_rows.push_back(os.str());
  };

  const double t0 = now_seconds();
  // pairwise grid, coupled by a common seed
  std::vector<double> taus{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75};
  std::vector<CollisionEstimate> pair_est;
  for (double tau : taus) {
    CollisionEstimate e = estimate_pair_collision(tau, d, trials, seed, workers);
    pair_est.push_back(e);
    add_row("spherical_pair", tau, 0.0, 0.0, e, predicted_log_inv_collision(tau, d));
  }
  bool monotone = true;
  for (std::size_t i = 0; i + 1 < pair_est.size(); ++i) {
    const double noise = 2.0 * std::sqrt(pair_est[i].std_err * pair_est[i].std_err +
                                         pair_est[i + 1].std_err * pair_est[i + 1].std_err);
    if (pair_est[i + 1].p_hat > pair_est[i].p_hat + noise) monotone = false;
  }
  rep.checks["pair_monotone_in_tau"] = monotone;

  // formula-agreement window at the standard tau grid
  bool formula_ok = true;
  for (double tau : {0.5, 1.0, std::numbers::sqrt2}) {
    CollisionEstimate e = estimate_pair_collision(tau, d, trials, derive_seed(seed, 7),
                                                  workers);
    const double pred = predicted_log_inv_collision(tau, d);
    const double lhs = std::abs(-std::log(std::max(e.p_hat, 1e-300)) - pred);
    const double tol = std::max(0.35 * pred, 3.0 * e.std_err / std::max(e.p_hat, 1e-300));
    if (lhs > tol) formula_ok = false;
    add_row("spherical_pair_check", tau, 0.0, 0.0, e, pred);
  }
  rep.checks["pair_formula_agreement"] = formula_ok;

  // three-point configuration (1, sqrt2, sqrt2)
  CollisionEstimate cond = estimate_conditional_collision(
      1.0, std::numbers::sqrt2, std::numbers::sqrt2, d, std::max<std::uint64_t>(trials / 2, 100),
      derive_seed(seed, 8), workers);
  const double sqd2 = std::sqrt(static_cast<double>(d)) / 2.0;
  add_row("spherical_conditional", 1.0, std::numbers::sqrt2, std::numbers::sqrt2, cond,
          sqd2);
  const double naive = sqd2 - predicted_log_inv_collision(1.0, d);
  const double cond_ln = -std::log(std::max(cond.p_hat, 1e-300));
  rep.metrics["conditional_ln_inv"] = cond_ln;
  rep.metrics["naive_bound"] = naive;
  rep.checks["three_point_strict"] = cond_ln >= naive + 0.3;
  rep.checks["three_point_ge_080_sqrtd_half"] = cond_ln >= 0.8 * sqd2;

  // grid partition calibration
  bool grid_ok = true;
  for (double tau : {0.05, 0.1, 0.2}) {
    CollisionEstimate e =
        estimate_grid_collision(tau, d, trials, derive_seed(seed, 9), workers);
    const double pred = tau * std::sqrt(static_cast<double>(d));
    add_row("grid_pair", tau, 0.0, 0.0, e, pred);
    const double ratio = -std::log(std::max(e.p_hat, 1e-300)) / pred;
    if (!(ratio >= 0.7 && ratio <= 1.4)) grid_ok = false;
  }
  rep.checks["grid_calibration"] = grid_ok;

  // overflow rate at default_T
  {
    const std::uint32_t T = default_T(d, 1e-6);
    SphericalPartitionSpec spec = sample_partition(d, T, derive_seed(seed, 10));
    Rng rng(derive_seed(seed, 11));
    std::uint32_t overflow = 0;
    const std::uint32_t npts = 10000;
    for (std::uint32_t i = 0; i < npts; ++i) {
      std::vector<double> u = random_unit(rng, d);
      if (locate(spec, u) == spec.overflow_index) ++overflow;
    }
    rep.metrics["overflow_rate"] = static_cast<double>(overflow) / npts;
    rep.checks["overflow_rate_le_1e3"] = overflow <= npts / 1000;
  }
  rep.metrics["time_total_seconds"] = now_seconds() - t0;
  return rep;
}

ExperimentReport run_vdc_suite(std::uint32_t n_sets, std::uint32_t set_size,
                               std::span<const double> eps_grid, std::uint64_t seed) {
  ExperimentReport rep;
  rep.run_id = "vdc";
  json echo;
  echo["sets"] = n_sets;
  echo["size"] = set_size;
  echo["seed"] = seed;
  echo["eps"] = std::vector<double>(eps_grid.begin(), eps_grid.end());
  rep.params_echo = echo.dump();
  rep.csv_header = "eps,set,score,count,bound,ratio";
  const std::uint32_t dim = 32;
  std::uint32_t violations = 0;
  double worst_ratio = 1e300;
  Rng rng(seed);
  for (double eps : eps_grid) {
    // points covered by a cap of radius sqrt(2)-eps around a hidden center:
    // <u*, u> >= eta_min = sqrt(2)*eps - eps^2/2
    const double eta_min = std::numbers::sqrt2 * eps - eps * eps / 2.0;
    for (std::uint32_t s = 0; s < n_sets; ++s) {
      std::vector<double> ustar = random_unit(rng, dim);
      std::vector<Point> pts(set_size);
      for (std::uint32_t i = 0; i < set_size; ++i) {
        const double cosq = eta_min + (1.0 - eta_min) * rng.uniform();
        const double sinq = std::sqrt(std::max(0.0, 1.0 - cosq * cosq));
        std::vector<double> v = random_unit(rng, dim);
        // orthogonalize v against ustar
        const double pr = dot(v, ustar);
        double n2 = 0.0;
        for (std::uint32_t j = 0; j < dim; ++j) {
          v[j] -= pr * ustar[j];
          n2 += v[j] * v[j];
        }
        const double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0;
        pts[i].id = i;
        pts[i].coords.resize(dim);
        for (std::uint32_t j = 0; j < dim; ++j)
          pts[i].coords[j] = cosq * ustar[j] + sinq * inv * v[j];
      }
      auto [center_id, score] = vdc_best_center(pts);
      const Point* u0 = nullptr;
      for (const Point& p : pts)
        if (p.id == center_id) u0 = &p;
      std::uint32_t count = 0;
      for (const Point& p : pts)
        if (dot(u0->coords, p.coords) >= eps * eps / 2.0) ++count;
      const double bound = eps * eps * static_cast<double>(set_size) / 2.0;
      const double ratio = static_cast<double>(count) / bound;
      worst_ratio = std::min(worst_ratio, ratio);
      if (static_cast<double>(count) < bound) ++violations;
      std::ostringstream os;
      os << fmt(eps) << "," << s << "," << fmt(score) << "," << count << ","
         << fmt(bound) << "," << fmt(ratio);
      rep.csv_rows.push_back(os.str());
    }
  }
  rep.metrics["violations"] = violations;
  rep.metrics["worst_ratio"] = worst_ratio;
  rep.checks["zero_violations"] = violations == 0;
  return rep;
}

ExperimentReport run_selftest(std::uint64_t seed, unsigned workers) {
  ExperimentReport rep;
  rep.run_id = "selftest";
  json echo;
  echo["seed"] = seed;
  echo["workers"] = workers;
  rep.params_echo = echo.dump();

  RandomInstance inst = gen_random_instance(600, 64, 2.0, 1.0, 40, derive_seed(seed, 1));
  BuildParams params;
  params.seed = derive_seed(seed, 2);
  PreparedDataset prep = prepare_dataset(inst.points, params);
  Forest forest = build_forest(std::move(prep.indexed_points), prep.params, 3,
                               prep.meta, std::move(prep.verify_points), workers);

  bool covered = true, depth_ok = true, gap_ok = true, repl_ok = true;
  for (const NodePtr& tree : forest.trees) {
    TreeAudit audit = audit_tree(*tree, forest.store, forest.params);
    covered = covered && audit.covered_all;
    depth_ok = depth_ok && audit.max_ball_depth <= forest.params.max_ball_depth;
    gap_ok = gap_ok && audit.gap_ratio_ok;
    repl_ok = repl_ok && static_cast<double>(audit.total_refs) <=
                             static_cast<double>(forest.store.size()) *
                                 audit.branch_budget;
  }
  rep.checks["coverage"] = covered;
  rep.checks["ball_depth"] = depth_ok;
  rep.checks["gap_ratio_monotone"] = gap_ok;
  rep.checks["replication_bound"] = repl_ok;

  // bit-exact serialization round trip
  const std::vector<std::uint8_t> bytes1 = serialize_forest(forest);
  Forest reloaded = deserialize_forest(bytes1);
  const std::vector<std::uint8_t> bytes2 = serialize_forest(reloaded);
  rep.checks["serialization_bit_exact"] = bytes1 == bytes2;

  // determinism: identical build and identical canonical report
  {
    PreparedDataset prep2 = prepare_dataset(inst.points, params);
    Forest forest2 = build_forest(std::move(prep2.indexed_points), prep2.params, 3,
                                  prep2.meta, std::move(prep2.verify_points), workers);
    rep.checks["build_deterministic"] = serialize_forest(forest2) == bytes1;
    ExperimentReport r1 = run_recall(inst, params, 3, workers);
    ExperimentReport r2 = run_recall(inst, params, 3, workers);
    rep.checks["report_deterministic"] = r1.canonical_json() == r2.canonical_json();
  }

  // returned points are always within c*r of the query in verification space
  {
    bool verified = true;
    const double cr = forest.params.c * forest.params.r;
    for (const Point& q : inst.queries) {
      if (auto hit = query_forest(forest, q)) {
        const Point qv = forest.to_verify(q);
        if (distance(forest.verify.by_id(*hit).coords, qv.coords) > cr)
          verified = false;
      }
    }
    rep.checks["returns_verified"] = verified;
  }
  return rep;
}

void write_dvec(const std::string& path, std::span<const Point> points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_dvec: cannot open " + path);
  for (const Point& p : points) {
    const std::uint32_t dim = static_cast<std::uint32_t>(p.coords.size());
    std::uint8_t hdr[4];
    for (int i = 0; i < 4; ++i) hdr[i] = static_cast<std::uint8_t>(dim >> (8 * i));
    out.write(reinterpret_cast<const char*>(hdr), 4);
    for (double x : p.coords) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
      std::uint8_t b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(bits >> (8 * i));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw std::runtime_error("write_dvec: write failed");
}

std::vector<Point> read_dvec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_dvec: cannot open " + path);
  std::vector<Point> points;
  for (;;) {
    std::uint8_t hdr[4];
    in.read(reinterpret_cast<char*>(hdr), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw std::runtime_error("read_dvec: truncated header");
    std::uint32_t dim = 0;
    for (int i = 0; i < 4; ++i) dim |= static_cast<std::uint32_t>(hdr[i]) << (8 * i);
    Point p;
    p.id = static_cast<std::uint32_t>(points.size());
    p.coords.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      std::uint8_t b[8];
      in.read(reinterpret_cast<char*>(b), 8);
      if (in.gcount() != 8) throw std::runtime_error("read_dvec: truncated vector");
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
      p.coords[j] = std::bit_cast<double>(bits);
    }
    points.push_back(std::move(p));
  }
  return points;
}

unsigned declared_workers() {
  if (const char* env = std::getenv("SANN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 256) return static_cast<unsigned>(v);
  }
  return 1;
}

}  // namespace sann

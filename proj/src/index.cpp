#include "sann/index.hpp"

#include <algorithm>
#include <atomic>
#include <queue>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "sann/rng.hpp"

namespace sann {

namespace {

constexpr double kSphereTol = 1e-6;
constexpr double kIndexSebTol = 1e-2;
constexpr double kPartitionMiss = 1e-6;

std::uint32_t annulus_of(double dist, double delta) {
  const double t = dist / delta;
  double k = std::ceil(t - 1e-9 * std::max(1.0, t));
  if (k < 1.0) k = 1.0;
  return static_cast<std::uint32_t>(k);
}

std::vector<std::uint32_t> ids_of(std::span<const Point> pts) {
  std::vector<std::uint32_t> ids;
  ids.reserve(pts.size());
  for (const Point& p : pts) ids.push_back(p.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::uint32_t min_id(std::span<const Point> pts) {
  std::uint32_t m = pts[0].id;
  for (const Point& p : pts) m = std::min(m, p.id);
  return m;
}

NodePtr make_node(auto&& alt) {
  auto n = std::make_unique<IndexNode>();
  n->node = std::move(alt);
  return n;
}

NodePtr make_store(std::span<const Point> pts) {
  LeafStore leaf;
  leaf.point_id = min_id(pts);
  leaf.members = ids_of(pts);
  return make_node(std::move(leaf));
}

NodePtr make_brute(std::span<const Point> pts) {
  LeafBruteForce leaf;
  leaf.ids = ids_of(pts);
  return make_node(std::move(leaf));
}

struct BuildCtx {
  const BuildParams& P;
  std::uint32_t dim;
  std::uint32_t max_run;
  std::uint64_t tree_seed;
  std::uint64_t node_counter = 0;

  std::uint64_t next_seed() { return derive_seed(tree_seed, ++node_counter); }
  std::uint32_t min_count(std::size_t m) const {
    const double t = std::ceil(P.tau * static_cast<double>(m));
    return std::max<std::uint32_t>(static_cast<std::uint32_t>(t), P.cluster_floor);
  }
};

NodePtr process(std::vector<Point> pts, BuildCtx& ctx, std::uint32_t ball_depth,
                std::uint32_t run_len);
NodePtr process_ball_impl(std::vector<Point> pts, double r1, double r2,
                          std::vector<double> o, double R, BuildCtx& ctx,
                          std::uint32_t ball_depth);
NodePtr process_sphere_impl(std::vector<Point> pts, double r1, double r2,
                            SphereFrame frame, BuildCtx& ctx, std::uint32_t ball_depth,
                            std::uint32_t run_len);

std::vector<Point> take_members(std::vector<Point>& pts,
                                const std::vector<std::uint32_t>& members) {
  std::vector<Point> taken;
  std::vector<Point> rest;
  taken.reserve(members.size());
  rest.reserve(pts.size() - members.size());
  for (Point& p : pts) {
    if (std::binary_search(members.begin(), members.end(), p.id))
      taken.push_back(std::move(p));
    else
      rest.push_back(std::move(p));
  }
  pts = std::move(rest);
  return taken;
}

NodePtr build_base_lsh(std::span<const Point> pts, bool spherical, double r1, double r2,
                       const SphereFrame& frame, BuildCtx& ctx) {
  LeafBaseLSH leaf;
  leaf.spherical = spherical;
  leaf.dim = ctx.dim;
  leaf.r1 = r1;
  leaf.r2 = r2;
  double p1_pred = 0.0;
  if (spherical) {
    leaf.frame = frame;
    leaf.T = default_T(ctx.dim, kPartitionMiss);
    leaf.threshold = std::pow(static_cast<double>(ctx.dim), 0.25);
    double tau1 = r1 / frame.radius;
    tau1 = std::clamp(tau1, 1e-9, 2.0 - 1e-9);
    p1_pred = std::exp(-predicted_log_inv_collision(tau1, ctx.dim));
  } else {
    p1_pred = std::exp(-r1 * std::sqrt(static_cast<double>(ctx.dim)));
  }
  const std::uint32_t K =
      static_cast<std::uint32_t>(std::ceil(3.0 / std::max(p1_pred, 1e-12)));
  for (std::uint32_t t = 0; t < K; ++t) {
    BaseLshTable table;
    table.seed = ctx.next_seed();
    if (spherical) {
      LazySphericalPartition part{table.seed, ctx.dim, leaf.T, leaf.threshold};
      std::vector<std::pair<std::uint64_t, std::vector<std::uint32_t>>> buckets;
      for (const Point& p : pts) {
        std::vector<double> u(ctx.dim);
        const double d = distance(p.coords, frame.center);
        for (std::uint32_t j = 0; j < ctx.dim; ++j)
          u[j] = (p.coords[j] - frame.center[j]) / d;
        const std::uint64_t key = locate(part, u);
        auto it = std::find_if(buckets.begin(), buckets.end(),
                               [&](const auto& b) { return b.first == key; });
        if (it == buckets.end())
          buckets.push_back({key, {p.id}});
        else
          it->second.push_back(p.id);
      }
      std::sort(buckets.begin(), buckets.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& b : buckets) std::sort(b.second.begin(), b.second.end());
      table.sph_buckets = std::move(buckets);
    } else {
      GridPartitionSpec spec = sample_grid_partition(ctx.dim, table.seed);
      std::vector<std::pair<GridKey, std::vector<std::uint32_t>>> buckets;
      for (const Point& p : pts) {
        GridKey key = locate_grid(spec, p.coords);
        auto it = std::find_if(buckets.begin(), buckets.end(),
                               [&](const auto& b) { return b.first == key; });
        if (it == buckets.end())
          buckets.push_back({std::move(key), {p.id}});
        else
          it->second.push_back(p.id);
      }
      std::sort(buckets.begin(), buckets.end());
      for (auto& b : buckets) std::sort(b.second.begin(), b.second.end());
      table.grid_buckets = std::move(buckets);
      leaf.width = spec.width;
      leaf.k = spec.k;
    }
    leaf.tables.push_back(std::move(table));
  }
  return make_node(std::move(leaf));
}

NodePtr process(std::vector<Point> pts, BuildCtx& ctx, std::uint32_t ball_depth,
                std::uint32_t run_len) {
  if (pts.size() <= ctx.P.leaf_cutoff || run_len >= ctx.max_run) return make_brute(pts);
  const std::size_t m = pts.size();
  const std::uint32_t need = ctx.min_count(m);
  const double ball_radius = 4.0 * ctx.P.c * ctx.P.c * ctx.P.r;

  ClusterSplit split;
  for (;;) {
    if (pts.size() <= ctx.P.leaf_cutoff) break;
    auto cluster =
        pts.size() > ctx.P.sample_threshold
            ? find_dense_ball_sampled(
                  pts, ball_radius, need,
                  std::max<std::uint32_t>(32, ctx.P.sample_threshold / 8),
                  ctx.next_seed())
            : find_dense_ball(pts, ball_radius, need);
    if (!cluster) break;
    std::vector<Point> members = take_members(pts, cluster->members);
    const Point* center = nullptr;
    for (const Point& p : members)
      if (p.id == cluster->center_id) center = &p;
    if (center == nullptr) throw std::logic_error("process: cluster center not member");
    std::vector<double> o = center->coords;
    NodePtr child = process_ball_impl(std::move(members), ctx.P.r, ctx.P.c * ctx.P.r,
                                      std::move(o), ball_radius, ctx, ball_depth + 1);
    split.clusters.push_back(ClusterChild{std::move(*cluster), std::move(child)});
  }

  NodePtr remainder;
  if (!pts.empty()) {
    if (pts.size() <= ctx.P.leaf_cutoff) {
      remainder = make_brute(pts);
    } else {
      GridSplit gs;
      gs.partition = sample_grid_partition(ctx.dim, ctx.next_seed());
      std::vector<std::pair<GridKey, std::vector<Point>>> parts;
      for (Point& p : pts) {
        GridKey key = locate_grid(gs.partition, p.coords);
        auto it = std::find_if(parts.begin(), parts.end(),
                               [&](const auto& b) { return b.first == key; });
        if (it == parts.end())
          parts.push_back({std::move(key), {std::move(p)}});
        else
          it->second.push_back(std::move(p));
      }
      std::sort(parts.begin(), parts.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [key, part_pts] : parts)
        gs.children.emplace_back(key, process(std::move(part_pts), ctx, ball_depth,
                                              run_len + 1));
      remainder = make_node(std::move(gs));
    }
  }

  if (split.clusters.empty()) {
    if (!remainder) throw std::logic_error("process: no clusters and no remainder");
    return remainder;
  }
  split.remainder = std::move(remainder);
  return make_node(std::move(split));
}

NodePtr process_ball_impl(std::vector<Point> pts, double r1, double r2,
                          std::vector<double> o, double R, BuildCtx& ctx,
                          std::uint32_t ball_depth) {
  if (ball_depth > ctx.P.max_ball_depth)
    throw std::runtime_error("process_ball: max_ball_depth exceeded");
  if (r1 + 2.0 * R <= r2) return make_store(pts);
  if (pts.size() <= ctx.P.leaf_cutoff) return make_brute(pts);

  const double delta = ctx.P.delta;
  AnnulusSplit split;
  split.center = o;
  split.R = R;
  split.delta = delta;
  split.r1 = r1;
  split.r2 = r2;

  // round every point onto its annulus and bucket by annulus index
  std::vector<std::pair<std::uint32_t, std::vector<Point>>> annuli;
  for (Point& p : pts) {
    Point rp = round_to_annulus(p, o, delta);
    const std::uint32_t i = annulus_of(distance(rp.coords, o), delta);
    auto it = std::find_if(annuli.begin(), annuli.end(),
                           [&](const auto& a) { return a.first == i; });
    if (it == annuli.end())
      annuli.push_back({i, {std::move(rp)}});
    else
      it->second.push_back(std::move(rp));
  }
  std::sort(annuli.begin(), annuli.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::uint32_t jmax =
      static_cast<std::uint32_t>(std::ceil((R + r1 + 2.0 * delta) / delta));
  const double r1r = r1 + 2.0 * delta;  // rounding widens the near threshold
  const double r2r = r2 - 2.0 * delta;

  for (auto& [i, apts] : annuli) {
    const double Ri = delta * i;
    const std::vector<std::uint32_t> annulus_ids = ids_of(apts);
    // shared child per data annulus, built at the i == j thresholds
    NodePtr diag;
    if (r1r < r2r && r2r > 0.0) {
      SphereFrame frame{o, Ri};
      diag = process_sphere_impl(std::move(apts), r1r, r2r, std::move(frame), ctx,
                                 ball_depth, 0);
    } else {
      diag = make_brute(apts);  // thresholds crossed: nothing left to separate
    }
    const std::uint32_t slot = static_cast<std::uint32_t>(split.children.size());
    split.children.push_back(std::move(diag));
    std::int32_t store_slot = -1;

    for (std::uint32_t j = 1; j <= jmax; ++j) {
      const double Rj = delta * j;
      const double gap = std::abs(Ri - Rj);  // same expression Project uses
      if (gap > r1r) continue;
      AnnulusEntry e;
      e.i = i;
      e.j = j;
      e.r1p = project_between_spheres(Ri, Rj, r1r);
      if (r2r > gap) {
        e.r2p = project_between_spheres(Ri, Rj, r2r);
        e.child_slot = slot;
      } else {
        // query annulus admissible for near pairs but infeasible for the far
        // threshold: any point of this annulus answers such queries
        e.r2p = -1.0;
        if (store_slot < 0) {
          store_slot = static_cast<std::int32_t>(split.children.size());
          LeafStore ls;
          ls.point_id = annulus_ids.front();
          ls.members = annulus_ids;
          split.children.push_back(make_node(std::move(ls)));
        }
        e.child_slot = static_cast<std::uint32_t>(store_slot);
      }
      split.entries.push_back(e);
    }
  }
  return make_node(std::move(split));
}

NodePtr process_sphere_impl(std::vector<Point> pts, double r1, double r2,
                            SphereFrame frame, BuildCtx& ctx, std::uint32_t ball_depth,
                            std::uint32_t run_len) {
  const double R = frame.radius;
  for (const Point& p : pts) {
    const double d = distance(p.coords, frame.center);
    if (std::abs(d - R) > kSphereTol * std::max(1.0, R))
      throw std::invalid_argument("process_sphere: point off the sphere");
  }
  if (r2 >= 2.0 * R) return make_store(pts);
  if (pts.size() <= ctx.P.leaf_cutoff || run_len >= ctx.max_run) return make_brute(pts);
  const double rho = 1.0 / (2.0 * ctx.P.c * ctx.P.c - 1.0);
  if (r1 / r2 <= rho) return build_base_lsh(pts, false, r1, r2, frame, ctx);
  if (r2 >= std::numbers::sqrt2 * R) return build_base_lsh(pts, true, r1, r2, frame, ctx);

  const std::size_t m = pts.size();
  const std::uint32_t need = ctx.min_count(m);
  const double cap_radius = (std::numbers::sqrt2 - ctx.P.eps) * R;

  ClusterSplit split;
  for (;;) {
    if (pts.size() <= ctx.P.leaf_cutoff) break;
    std::optional<DenseCluster> cluster;
    if (pts.size() > ctx.P.sample_threshold) {
      cluster = find_dense_cap_sampled(pts, frame, cap_radius, need,
                                       std::max<std::uint32_t>(32, ctx.P.sample_threshold / 8),
                                       ctx.next_seed());
    } else {
      cluster = find_dense_cap(pts, frame, cap_radius, need);
    }
    if (!cluster) break;
    std::vector<Point> members = take_members(pts, cluster->members);
    Ball seb = smallest_enclosing_ball(members, kIndexSebTol);
    NodePtr child = process_ball_impl(std::move(members), r1, r2, std::move(seb.center),
                                      seb.radius, ctx, ball_depth + 1);
    split.clusters.push_back(ClusterChild{std::move(*cluster), std::move(child)});
  }

  NodePtr remainder;
  if (!pts.empty()) {
    if (pts.size() <= ctx.P.leaf_cutoff) {
      remainder = make_brute(pts);
    } else {
      SphericalSplit ss;
      ss.frame = frame;
      const std::uint32_t T = default_T(ctx.dim, kPartitionMiss);
      ss.partition = LazySphericalPartition{
          ctx.next_seed(), ctx.dim, T, std::pow(static_cast<double>(ctx.dim), 0.25)};
      std::vector<std::pair<std::uint32_t, std::vector<Point>>> parts;
      for (Point& p : pts) {
        std::vector<double> u(ctx.dim);
        const double d = distance(p.coords, frame.center);
        for (std::uint32_t j = 0; j < ctx.dim; ++j)
          u[j] = (p.coords[j] - frame.center[j]) / d;
        const std::uint32_t key = locate(ss.partition, u);
        auto it = std::find_if(parts.begin(), parts.end(),
                               [&](const auto& b) { return b.first == key; });
        if (it == parts.end())
          parts.push_back({key, {std::move(p)}});
        else
          it->second.push_back(std::move(p));
      }
      std::sort(parts.begin(), parts.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [key, part_pts] : parts)
        ss.children.emplace_back(
            key, process_sphere_impl(std::move(part_pts), r1, r2, frame, ctx,
                                     ball_depth, run_len + 1));
      remainder = make_node(std::move(ss));
    }
  }

  if (split.clusters.empty()) {
    if (!remainder) throw std::logic_error("process_sphere: empty recursion");
    return remainder;
  }
  split.remainder = std::move(remainder);
  return make_node(std::move(split));
}

}  // namespace

void BuildParams::validate() const {
  if (!(c > 1.0)) throw std::invalid_argument("BuildParams: c must exceed 1");
  if (!(r > 0.0)) throw std::invalid_argument("BuildParams: r must be positive");
  if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("BuildParams: eps in (0,0.5)");
  if (!(delta > 0.0)) throw std::invalid_argument("BuildParams: delta must be positive");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("BuildParams: tau in (0,1)");
  if (max_ball_depth < 1) throw std::invalid_argument("BuildParams: max_ball_depth >= 1");
  if (leaf_cutoff < 1) throw std::invalid_argument("BuildParams: leaf_cutoff >= 1");
}

PointStore::PointStore(std::vector<Point> pts) : points_(std::move(pts)) {
  if (!points_.empty()) dim_ = static_cast<std::uint32_t>(points_[0].coords.size());
  std::uint32_t max_id = 0;
  for (const Point& p : points_) max_id = std::max(max_id, p.id);
  id_to_pos_.assign(max_id + 1, UINT32_MAX);
  for (std::uint32_t i = 0; i < points_.size(); ++i) id_to_pos_[points_[i].id] = i;
}

const Point& PointStore::by_id(std::uint32_t id) const {
  if (id >= id_to_pos_.size() || id_to_pos_[id] == UINT32_MAX)
    throw std::out_of_range("PointStore: unknown id");
  return points_[id_to_pos_[id]];
}

NodePtr build_tree(const PointStore& store, const BuildParams& params,
                   std::uint64_t tree_seed) {
  params.validate();
  if (store.size() == 0) throw std::invalid_argument("build_tree: empty dataset");
  BuildCtx ctx{params, store.dim(),
               params.max_run_length
                   ? params.max_run_length
                   : static_cast<std::uint32_t>(std::ceil(
                         64.0 * std::log2(std::max<double>(2.0, store.size())))),
               tree_seed};
  std::vector<Point> pts(store.all().begin(), store.all().end());
  return process(std::move(pts), ctx, 0, 0);
}

NodePtr process_ball(std::vector<Point> points, double r1, double r2,
                     std::vector<double> center, double R, const BuildParams& params,
                     std::uint64_t seed) {
  params.validate();
  if (points.empty()) throw std::invalid_argument("process_ball: empty input");
  for (const Point& p : points)
    if (distance(p.coords, center) > R * (1.0 + kSphereTol))
      throw std::invalid_argument("process_ball: point outside the ball");
  BuildCtx ctx{params, static_cast<std::uint32_t>(points[0].coords.size()),
               params.max_run_length ? params.max_run_length : 64, seed};
  return process_ball_impl(std::move(points), r1, r2, std::move(center), R, ctx, 1);
}

NodePtr process_sphere(std::vector<Point> points, double r1, double r2,
                       SphereFrame frame, const BuildParams& params,
                       std::uint64_t seed) {
  params.validate();
  if (points.empty()) throw std::invalid_argument("process_sphere: empty input");
  BuildCtx ctx{params, static_cast<std::uint32_t>(points[0].coords.size()),
               params.max_run_length ? params.max_run_length : 64, seed};
  return process_sphere_impl(std::move(points), r1, r2, std::move(frame), ctx, 0, 0);
}

// ---- query ----

namespace {

struct QueryCtx {
  const BuildParams& P;
  const PointStore& store;
  const Point& q_verify;
  QueryStats* stats;
  double cr;
  std::vector<bool> rejected;  // ids already examined and rejected this query
};

std::optional<std::uint32_t> verify_one(std::uint32_t id, QueryCtx& ctx) {
  if (id < ctx.rejected.size() && ctx.rejected[id]) return std::nullopt;
  if (ctx.stats) {
    ++ctx.stats->candidates_examined;
    ++ctx.stats->distance_computations;
  }
  if (distance(ctx.store.by_id(id).coords, ctx.q_verify.coords) <= ctx.cr) return id;
  if (id < ctx.rejected.size()) ctx.rejected[id] = true;
  return std::nullopt;
}

std::optional<std::uint32_t> verify_ids(std::span<const std::uint32_t> ids,
                                        QueryCtx& ctx) {
  for (std::uint32_t id : ids)
    if (auto hit = verify_one(id, ctx)) return hit;
  return std::nullopt;
}

std::vector<double> normalized_dir(std::span<const double> p,
                                   std::span<const double> center) {
  std::vector<double> u(p.size());
  const double d = distance(p, center);
  if (d <= 0.0) return {};
  for (std::size_t j = 0; j < p.size(); ++j) u[j] = (p[j] - center[j]) / d;
  return u;
}

std::optional<std::uint32_t> walk_base_lsh(const LeafBaseLSH& leaf,
                                           const std::vector<double>& q, QueryCtx& ctx) {
  if (leaf.spherical) {
    std::vector<double> u = normalized_dir(q, leaf.frame.center);
    if (u.empty()) return std::nullopt;
    for (const BaseLshTable& table : leaf.tables) {
      LazySphericalPartition part{table.seed, leaf.dim, leaf.T, leaf.threshold};
      const std::uint64_t key = locate(part, u);
      auto it = std::lower_bound(
          table.sph_buckets.begin(), table.sph_buckets.end(), key,
          [](const auto& b, std::uint64_t k) { return b.first < k; });
      if (it != table.sph_buckets.end() && it->first == key)
        if (auto hit = verify_ids(it->second, ctx)) return hit;
    }
  } else {
    for (const BaseLshTable& table : leaf.tables) {
      GridPartitionSpec spec = sample_grid_partition(leaf.dim, table.seed);
      GridKey key = locate_grid(spec, q);
      auto it = std::lower_bound(
          table.grid_buckets.begin(), table.grid_buckets.end(), key,
          [](const auto& b, const GridKey& k) { return b.first < k; });
      if (it != table.grid_buckets.end() && it->first == key)
        if (auto hit = verify_ids(it->second, ctx)) return hit;
    }
  }
  return std::nullopt;
}

// Best-first traversal over the admissible part of the tree. The visited set
// is exactly the one the node rules dictate (every cluster child, the located
// part, all (i, j_q) annulus entries); the order follows the accumulated
// radial mismatch so the shells a near neighbor can occupy are probed first:
// for |q - p| = u in high dimension, dist(p, o)^2 concentrates near
// dist(q, o)^2 - u^2.
struct Frontier {
  double prio;
  std::uint64_t seq;
  const IndexNode* node;
  std::vector<double> q_nav;
  std::uint32_t ball_depth;
};

struct FrontierOrder {
  bool operator()(const Frontier& a, const Frontier& b) const {
    if (a.prio != b.prio) return a.prio > b.prio;  // min-heap
    return a.seq > b.seq;
  }
};

std::optional<std::uint32_t> walk(std::span<const IndexNode* const> roots,
                                  const std::vector<double>& q_indexed,
                                  QueryCtx& ctx) {
  std::priority_queue<Frontier, std::vector<Frontier>, FrontierOrder> frontier;
  std::uint64_t seq = 0;
  for (const IndexNode* root : roots) frontier.push({0.0, seq++, root, q_indexed, 0});
  while (!frontier.empty()) {
    Frontier cur = std::move(const_cast<Frontier&>(frontier.top()));
    frontier.pop();
    const IndexNode& node = *cur.node;
    const std::vector<double>& q = cur.q_nav;
    if (ctx.stats) ++ctx.stats->nodes_visited;
    std::optional<std::uint32_t> hit = std::visit(
        [&](const auto& alt) -> std::optional<std::uint32_t> {
          using T = std::decay_t<decltype(alt)>;
          if constexpr (std::is_same_v<T, LeafStore>) {
            return verify_one(alt.point_id, ctx);
          } else if constexpr (std::is_same_v<T, LeafBruteForce>) {
            return verify_ids(alt.ids, ctx);
          } else if constexpr (std::is_same_v<T, LeafBaseLSH>) {
            return walk_base_lsh(alt, q, ctx);
          } else if constexpr (std::is_same_v<T, SphericalSplit>) {
            std::vector<double> u = normalized_dir(q, alt.frame.center);
            if (u.empty()) return std::nullopt;
            const std::uint32_t key = locate(alt.partition, u);
            auto it = std::lower_bound(
                alt.children.begin(), alt.children.end(), key,
                [](const auto& c, std::uint32_t k) { return c.first < k; });
            if (it != alt.children.end() && it->first == key)
              frontier.push({cur.prio, seq++, it->second.get(), q, cur.ball_depth});
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, GridSplit>) {
            GridKey key = locate_grid(alt.partition, q);
            auto it = std::lower_bound(
                alt.children.begin(), alt.children.end(), key,
                [](const auto& c, const GridKey& k) { return c.first < k; });
            if (it != alt.children.end() && it->first == key)
              frontier.push({cur.prio, seq++, it->second.get(), q, cur.ball_depth});
            return std::nullopt;
          } else if constexpr (std::is_same_v<T, ClusterSplit>) {
            for (const ClusterChild& cc : alt.clusters)
              frontier.push({cur.prio, seq++, cc.child.get(), q, cur.ball_depth});
            if (alt.remainder)
              frontier.push({cur.prio, seq++, alt.remainder.get(), q, cur.ball_depth});
            return std::nullopt;
          } else {
            static_assert(std::is_same_v<T, AnnulusSplit>);
            const double d = distance(q, alt.center);
            if (d > alt.R + alt.r1) return std::nullopt;
            if (ctx.stats)
              ctx.stats->ball_depth_max =
                  std::max(ctx.stats->ball_depth_max, cur.ball_depth + 1);
            const std::uint32_t j = annulus_of(d, alt.delta);
            const double r1r = alt.r1 + 2.0 * alt.delta;
            const double target =
                std::sqrt(std::max(0.0, d * d - (2.0 / 3.0) * r1r * r1r));
            for (const AnnulusEntry& e : alt.entries) {
              if (e.j != j) continue;
              const double Ri = alt.delta * e.i;
              std::vector<double> qp(q.size());
              if (d <= alt.delta * 1e-12) {
                qp = alt.center;
                qp[0] += Ri;
              } else {
                const double f = Ri / d;
                for (std::size_t x = 0; x < q.size(); ++x)
                  qp[x] = alt.center[x] + f * (q[x] - alt.center[x]);
              }
              frontier.push({cur.prio + std::abs(Ri - target), seq++,
                             alt.children[e.child_slot].get(), std::move(qp),
                             cur.ball_depth + 1});
            }
            return std::nullopt;
          }
        },
        node.node);
    if (hit) return hit;
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::uint32_t> query_tree(const IndexNode& root, const Point& q_indexed,
                                        const Point& q_verify,
                                        const BuildParams& params,
                                        const PointStore& verify_store,
                                        QueryStats* stats) {
  QueryCtx ctx{params, verify_store, q_verify, stats, params.c * params.r, {}};
  ctx.rejected.assign(verify_store.max_id() + 1, false);
  const IndexNode* roots[1] = {&root};
  return walk(roots, q_indexed.coords, ctx);
}

// ---- forest ----

Point Forest::to_verify(const Point& q_original) const {
  Point q = q_original;
  for (double& x : q.coords) x *= meta.scale;
  return q;
}

Point Forest::to_indexed(const Point& q_original) const {
  Point q = to_verify(q_original);
  if (meta.jl_seed != 0 && meta.indexed_dim < meta.orig_dim) {
    std::vector<Point> one{q};
    q = std::move(jl_reduce(one, meta.indexed_dim, meta.jl_seed)[0]);
  }
  return q;
}

Forest build_forest(std::vector<Point> points_indexed, const BuildParams& params,
                    std::uint32_t num_trees, const PipelineMeta& meta,
                    std::vector<Point> verify_points, unsigned workers) {
  params.validate();
  if (num_trees == 0) throw std::invalid_argument("build_forest: num_trees >= 1");
  Forest f;
  f.params = params;
  f.meta = meta;
  if (f.meta.orig_dim == 0 && !points_indexed.empty()) {
    f.meta.orig_dim = static_cast<std::uint32_t>(points_indexed[0].coords.size());
    f.meta.indexed_dim = f.meta.orig_dim;
  }
  if (verify_points.empty())
    verify_points.assign(points_indexed.begin(), points_indexed.end());
  f.store = PointStore(std::move(points_indexed));
  f.verify = PointStore(std::move(verify_points));
  f.trees.resize(num_trees);
  if (workers <= 1) {
    for (std::uint32_t t = 0; t < num_trees; ++t)
      f.trees[t] = build_tree(f.store, params, derive_seed(params.seed, t));
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::uint32_t> next{0};
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::uint32_t t = next.fetch_add(1);
          if (t >= num_trees) return;
          f.trees[t] = build_tree(f.store, params, derive_seed(params.seed, t));
        }
      });
    for (auto& th : pool) th.join();
  }
  return f;
}

std::optional<std::uint32_t> query_forest(const Forest& forest, const Point& q_original,
                                          QueryStats* stats) {
  const Point q_verify = forest.to_verify(q_original);
  Point q_indexed;
  if (forest.meta.jl_seed != 0 && forest.meta.indexed_dim < forest.meta.orig_dim) {
    std::vector<Point> one{q_verify};
    q_indexed = std::move(jl_reduce(one, forest.meta.indexed_dim, forest.meta.jl_seed)[0]);
  } else {
    q_indexed = q_verify;
  }
  // one shared frontier: trees are interleaved by priority, ties by tree order
  QueryCtx ctx{forest.params, forest.verify, q_verify, stats,
               forest.params.c * forest.params.r, {}};
  ctx.rejected.assign(forest.verify.max_id() + 1, false);
  std::vector<const IndexNode*> roots;
  roots.reserve(forest.trees.size());
  for (const NodePtr& tree : forest.trees) roots.push_back(tree.get());
  return walk(roots, q_indexed.coords, ctx);
}

std::uint32_t default_num_trees(std::size_t n, double c) {
  const double rho = 1.0 / (2.0 * c * c - 1.0);
  return static_cast<std::uint32_t>(
      std::ceil(4.0 * std::pow(static_cast<double>(n), rho)));
}

// ---- audit ----

namespace {

struct AuditCtx {
  std::vector<bool> covered;
  std::uint64_t refs = 0;
  std::uint32_t max_depth = 0;
  double max_R = 0.0;
  bool gap_ok = true;
  std::uint64_t leaves = 0;
  std::uint64_t nodes = 0;
  const PointStore* store = nullptr;

  void mark(std::uint32_t id) {
    const std::uint32_t pos = id;
    if (pos < covered.size()) covered[pos] = true;
  }
};

void audit_walk(const IndexNode& node, std::uint32_t depth, AuditCtx& ctx) {
  ++ctx.nodes;
  std::visit(
      [&](const auto& alt) {
        using T = std::decay_t<decltype(alt)>;
        if constexpr (std::is_same_v<T, LeafStore>) {
          ++ctx.leaves;
          ctx.refs += alt.members.size();
          for (auto id : alt.members) ctx.mark(id);
        } else if constexpr (std::is_same_v<T, LeafBruteForce>) {
          ++ctx.leaves;
          ctx.refs += alt.ids.size();
          for (auto id : alt.ids) ctx.mark(id);
        } else if constexpr (std::is_same_v<T, LeafBaseLSH>) {
          ++ctx.leaves;
          if (!alt.tables.empty()) {
            if (alt.spherical) {
              for (const auto& b : alt.tables[0].sph_buckets)
                for (auto id : b.second) ctx.mark(id);
            } else {
              for (const auto& b : alt.tables[0].grid_buckets)
                for (auto id : b.second) ctx.mark(id);
            }
            for (const auto& t : alt.tables) {
              for (const auto& b : t.sph_buckets) ctx.refs += b.second.size();
              for (const auto& b : t.grid_buckets) ctx.refs += b.second.size();
            }
          }
        } else if constexpr (std::is_same_v<T, SphericalSplit>) {
          for (const auto& [key, child] : alt.children) audit_walk(*child, depth, ctx);
        } else if constexpr (std::is_same_v<T, GridSplit>) {
          for (const auto& [key, child] : alt.children) audit_walk(*child, depth, ctx);
        } else if constexpr (std::is_same_v<T, ClusterSplit>) {
          for (const ClusterChild& cc : alt.clusters) audit_walk(*cc.child, depth, ctx);
          if (alt.remainder) audit_walk(*alt.remainder, depth, ctx);
        } else {
          static_assert(std::is_same_v<T, AnnulusSplit>);
          ctx.max_depth = std::max(ctx.max_depth, depth + 1);
          ctx.max_R = std::max(ctx.max_R, alt.R);
          const double r1r = alt.r1 + 2.0 * alt.delta;
          const double r2r = alt.r2 - 2.0 * alt.delta;
          for (const AnnulusEntry& e : alt.entries) {
            if (e.r2p < 0.0) continue;  // guaranteed-near pair, no gap to check
            // Project can only widen the rounded gap: r2p/r1p >= r2r/r1r
            if (e.r2p * r1r < r2r * e.r1p * (1.0 - 1e-9)) ctx.gap_ok = false;
          }
          for (const NodePtr& child : alt.children)
            if (child) audit_walk(*child, depth + 1, ctx);
        }
      },
      node.node);
}

}  // namespace

TreeAudit audit_tree(const IndexNode& root, const PointStore& store,
                     const BuildParams& params) {
  AuditCtx ctx;
  std::uint32_t max_id = 0;
  for (const Point& p : store.all()) max_id = std::max(max_id, p.id);
  ctx.covered.assign(max_id + 1, false);
  ctx.store = &store;
  audit_walk(root, 0, ctx);
  TreeAudit out;
  out.covered_all = true;
  for (const Point& p : store.all())
    if (!ctx.covered[p.id]) out.covered_all = false;
  out.max_ball_depth = ctx.max_depth;
  out.total_refs = ctx.refs;
  out.branch_budget =
      std::pow(std::ceil((ctx.max_R + params.r) / params.delta) + 1.0,
               static_cast<double>(params.max_ball_depth));
  out.gap_ratio_ok = ctx.gap_ok;
  out.leaf_count = ctx.leaves;
  out.node_count = ctx.nodes;
  return out;
}

}  // namespace sann

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sann/clustering.hpp"
#include "sann/euclidean_lsh.hpp"
#include "sann/geometry.hpp"
#include "sann/spherical_lsh.hpp"

namespace sann {

struct BuildParams {
  double c = 2.0;    // approximation factor, > 1
  double r = 1.0;    // near threshold (datasets are rescaled to r = 1 at ingest)
  double eps = 0.2;  // cluster slack, in (0, 0.5)
  double delta = 0.05;  // annulus width
  double tau = 0.01;    // dense fraction, in (0, 1)
  std::uint32_t leaf_cutoff = 32;
  std::uint32_t max_ball_depth = 8;
  std::uint32_t max_run_length = 0;  // 0: resolved to 64*log2(n) at build
  std::uint32_t sample_threshold = 4096;
  std::uint32_t cluster_floor = 16;  // absolute minimum dense-cluster size
  std::uint32_t d_target = 0;        // JL target at ingest; 0: formula default
  std::uint64_t seed = 42;

  void validate() const;  // throws std::invalid_argument
};

struct IndexNode;
using NodePtr = std::unique_ptr<IndexNode>;

// Base cases "store any point": representative id answers every valid query;
// members kept for the coverage audit.
struct LeafStore {
  std::uint32_t point_id = 0;
  std::vector<std::uint32_t> members;
};

struct LeafBruteForce {
  std::vector<std::uint32_t> ids;  // sorted
};

struct BaseLshTable {
  std::uint64_t seed = 0;
  // exactly one of these is used, per the leaf kind
  std::vector<std::pair<std::uint64_t, std::vector<std::uint32_t>>> sph_buckets;
  std::vector<std::pair<GridKey, std::vector<std::uint32_t>>> grid_buckets;
};

// Hash-table amplification base case: K independent single-partition tables.
struct LeafBaseLSH {
  bool spherical = false;
  SphereFrame frame;  // spherical only: normalization frame
  std::uint32_t dim = 0;
  std::uint32_t T = 0;        // spherical
  double threshold = 0.0;     // spherical
  double width = 0.0;         // grid
  std::uint32_t k = 0;        // grid
  double r1 = 0.0, r2 = 0.0;  // thresholds the leaf was built for
  std::vector<BaseLshTable> tables;
};

struct SphericalSplit {
  SphereFrame frame;
  LazySphericalPartition partition;
  // part index -> child; the overflow part (index T) is one more child
  std::vector<std::pair<std::uint32_t, NodePtr>> children;
};

struct GridSplit {
  GridPartitionSpec partition;
  std::vector<std::pair<GridKey, NodePtr>> children;  // sorted by key
};

struct ClusterChild {
  DenseCluster cluster;
  NodePtr child;
};

struct ClusterSplit {
  std::vector<ClusterChild> clusters;
  NodePtr remainder;  // null when the cluster loop consumed everything
};

struct AnnulusEntry {
  std::uint32_t i = 0, j = 0;  // data annulus, query annulus
  double r1p = 0.0, r2p = 0.0;
  std::uint32_t child_slot = 0;
};

// Ball discretized into annuli. Children are shared per data annulus i (built
// at the i == j thresholds); entries keep the per-(i, j) projected thresholds.
struct AnnulusSplit {
  std::vector<double> center;
  double R = 0.0;
  double delta = 0.0;
  double r1 = 0.0, r2 = 0.0;
  std::vector<AnnulusEntry> entries;  // sorted by (i, j)
  std::vector<NodePtr> children;
};

struct IndexNode {
  std::variant<LeafStore, LeafBruteForce, LeafBaseLSH, SphericalSplit, GridSplit,
               ClusterSplit, AnnulusSplit>
      node;
};

struct QueryStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t candidates_examined = 0;
  std::uint64_t distance_computations = 0;
  std::uint32_t ball_depth_max = 0;
};

class PointStore {
 public:
  PointStore() = default;
  explicit PointStore(std::vector<Point> pts);
  const Point& by_id(std::uint32_t id) const;
  std::span<const Point> all() const { return points_; }
  std::size_t size() const { return points_.size(); }
  std::uint32_t dim() const { return dim_; }
  std::uint32_t max_id() const {
    return id_to_pos_.empty() ? 0 : static_cast<std::uint32_t>(id_to_pos_.size() - 1);
  }

 private:
  std::vector<Point> points_;
  std::vector<std::uint32_t> id_to_pos_;
  std::uint32_t dim_ = 0;
};

// ---- build ----

NodePtr build_tree(const PointStore& store, const BuildParams& params,
                   std::uint64_t tree_seed);

// Direct entry points for the ball/sphere recursions (tests drive these).
NodePtr process_ball(std::vector<Point> points, double r1, double r2,
                     std::vector<double> center, double R, const BuildParams& params,
                     std::uint64_t seed = 1);
NodePtr process_sphere(std::vector<Point> points, double r1, double r2,
                       SphereFrame frame, const BuildParams& params,
                       std::uint64_t seed = 1);

// ---- query ----

// Navigates with q_indexed; candidates verify against q_verify in the
// verification space (rescaled original coordinates).
std::optional<std::uint32_t> query_tree(const IndexNode& root, const Point& q_indexed,
                                        const Point& q_verify,
                                        const BuildParams& params,
                                        const PointStore& verify_store,
                                        QueryStats* stats = nullptr);

// ---- forest ----

struct PipelineMeta {
  std::uint32_t orig_dim = 0;
  std::uint32_t indexed_dim = 0;
  double scale = 1.0;        // original is multiplied by this at ingest
  std::uint64_t jl_seed = 0; // 0: no reduction
};

struct Forest {
  BuildParams params;  // thresholds with r == 1 after ingest
  PipelineMeta meta;
  PointStore store;   // indexed-space points (navigation)
  PointStore verify;  // rescaled original points (verification space)
  std::vector<NodePtr> trees;

  Point to_indexed(const Point& q_original) const;
  Point to_verify(const Point& q_original) const;
};

// verify_points empty means the indexed points double as verification space.
Forest build_forest(std::vector<Point> points_indexed, const BuildParams& params,
                    std::uint32_t num_trees, const PipelineMeta& meta = {},
                    std::vector<Point> verify_points = {}, unsigned workers = 1);

// Takes the query in original coordinates and applies the ingest pipeline.
std::optional<std::uint32_t> query_forest(const Forest& forest, const Point& q_original,
                                          QueryStats* stats = nullptr);

std::uint32_t default_num_trees(std::size_t n, double c);

// ---- audits (selftest / acceptance) ----

struct TreeAudit {
  bool covered_all = false;
  std::uint32_t max_ball_depth = 0;
  std::uint64_t total_refs = 0;
  double branch_budget = 0.0;
  bool gap_ratio_ok = false;
  std::uint64_t leaf_count = 0;
  std::uint64_t node_count = 0;
};

TreeAudit audit_tree(const IndexNode& root, const PointStore& store,
                     const BuildParams& params);

// ---- serialization ----

void save_forest(const Forest& forest, const std::string& path);
Forest load_forest(const std::string& path);
std::vector<std::uint8_t> serialize_forest(const Forest& forest);
Forest deserialize_forest(std::span<const std::uint8_t> bytes);

}  // namespace sann

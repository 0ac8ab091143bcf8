#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sann/index.hpp"

namespace sann {

// n uniform points on the sphere of radius c*r/sqrt(2); each query planted
// uniformly within distance r of a random data point.
struct RandomInstance {
  std::vector<Point> points;
  std::vector<Point> queries;
  std::vector<std::uint32_t> planted;  // data id each query was planted at
  double c = 2.0;
  double r = 1.0;
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;
  // fraction of non-planted query-point pairs beyond (c - 0.2) * r, measured
  // at generation
  double far_fraction = 1.0;
};

RandomInstance gen_random_instance(std::uint32_t n, std::uint32_t d, double c, double r,
                                   std::uint32_t n_queries, std::uint64_t seed);

// Closest point if within threshold, ties to the smaller id.
std::optional<std::uint32_t> brute_force_near(std::span<const Point> points,
                                              const Point& q, double threshold);

struct ExperimentReport {
  std::string run_id;
  std::string params_echo;                // JSON text
  std::map<std::string, double> metrics;  // keys starting "time_" are wall clock
  std::map<std::string, bool> checks;
  std::string csv_header;
  std::vector<std::string> csv_rows;

  bool all_checks_pass() const;
  std::string to_json() const;
  // Deterministic subset: everything except time_* metrics.
  std::string canonical_json() const;
  void write(const std::string& json_path, const std::string& csv_path) const;
};

// Rescales to r = 1 and applies the JL reduction (d_target == 0 picks
// ceil(max(32, log2(n) * log2(log2(n) + 2))); targets >= dim mean identity).
struct PreparedDataset {
  std::vector<Point> indexed_points;
  std::vector<Point> verify_points;  // rescaled originals (verification space)
  PipelineMeta meta;
  BuildParams params;  // r == 1, other fields carried over
};
PreparedDataset prepare_dataset(std::span<const Point> original, const BuildParams& raw);

std::uint32_t jl_default_target(std::size_t n);

ExperimentReport run_recall(const RandomInstance& instance, const BuildParams& params,
                            std::uint32_t num_trees, unsigned workers = 1);

ExperimentReport run_collision_suite(std::uint32_t d, std::uint64_t trials,
                                     std::uint64_t seed, unsigned workers = 1);

ExperimentReport run_vdc_suite(std::uint32_t n_sets, std::uint32_t set_size,
                               std::span<const double> eps_grid, std::uint64_t seed);

// Structural invariant suite: coverage, ball depth, gap ratios, replication
// bound, bit-exact serialization round trip, determinism under a fixed seed.
ExperimentReport run_selftest(std::uint64_t seed, unsigned workers = 1);

// "dvec": per vector a 4-byte little-endian dimension then that many
// little-endian IEEE-754 doubles; ids are positional.
void write_dvec(const std::string& path, std::span<const Point> points);
std::vector<Point> read_dvec(const std::string& path);

unsigned declared_workers();  // SANN_THREADS, default 1

}  // namespace sann

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sann/harness.hpp"

using nlohmann::json;

namespace {

sann::BuildParams params_from_json(const json& j) {
  sann::BuildParams p;
  if (j.contains("c")) p.c = j["c"].get<double>();
  if (j.contains("r")) p.r = j["r"].get<double>();
  if (j.contains("eps")) p.eps = j["eps"].get<double>();
  if (j.contains("delta")) p.delta = j["delta"].get<double>();
  if (j.contains("tau")) p.tau = j["tau"].get<double>();
  if (j.contains("leaf_cutoff")) p.leaf_cutoff = j["leaf_cutoff"].get<std::uint32_t>();
  if (j.contains("max_ball_depth"))
    p.max_ball_depth = j["max_ball_depth"].get<std::uint32_t>();
  if (j.contains("max_run_length"))
    p.max_run_length = j["max_run_length"].get<std::uint32_t>();
  if (j.contains("sample_threshold"))
    p.sample_threshold = j["sample_threshold"].get<std::uint32_t>();
  if (j.contains("cluster_floor"))
    p.cluster_floor = j["cluster_floor"].get<std::uint32_t>();
  if (j.contains("d_target")) p.d_target = j["d_target"].get<std::uint32_t>();
  if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
  return p;
}

struct ParamFlags {
  std::string params_file;
  std::optional<double> c, r, eps, delta, tau;
  std::optional<std::uint32_t> leaf_cutoff, max_ball_depth, max_run_length,
      sample_threshold, cluster_floor, d_target;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--params", params_file, "JSON file mirroring the build parameters");
    cmd->add_option("--c", c, "approximation factor");
    cmd->add_option("--r", r, "near threshold");
    cmd->add_option("--eps", eps, "cluster slack");
    cmd->add_option("--delta", delta, "annulus width (relative to r = 1)");
    cmd->add_option("--tau", tau, "dense fraction");
    cmd->add_option("--leaf-cutoff", leaf_cutoff, "brute-force leaf size");
    cmd->add_option("--max-ball-depth", max_ball_depth, "ball recursion cap");
    cmd->add_option("--max-run-length", max_run_length, "partition run cap");
    cmd->add_option("--sample-threshold", sample_threshold,
                    "switch to sampled clustering above this size");
    cmd->add_option("--cluster-floor", cluster_floor, "minimum dense-cluster size");
    cmd->add_option("--d-target", d_target, "JL target dimension (0 = auto)");
    cmd->add_option("--seed", seed, "build seed");
  }

  sann::BuildParams resolve() const {
    sann::BuildParams p;
    if (!params_file.empty()) {
      std::ifstream in(params_file);
      if (!in) throw std::runtime_error("cannot open " + params_file);
      json j;
      in >> j;
      p = params_from_json(j);
    }
    if (c) p.c = *c;
    if (r) p.r = *r;
    if (eps) p.eps = *eps;
    if (delta) p.delta = *delta;
    if (tau) p.tau = *tau;
    if (leaf_cutoff) p.leaf_cutoff = *leaf_cutoff;
    if (max_ball_depth) p.max_ball_depth = *max_ball_depth;
    if (max_run_length) p.max_run_length = *max_run_length;
    if (sample_threshold) p.sample_threshold = *sample_threshold;
    if (cluster_floor) p.cluster_floor = *cluster_floor;
    if (d_target) p.d_target = *d_target;
    if (seed) p.seed = *seed;
    return p;
  }
};

int cmd_gen(std::uint32_t n, std::uint32_t d, double c, double r, std::uint32_t queries,
            std::uint64_t seed, const std::string& out) {
  sann::RandomInstance inst = sann::gen_random_instance(n, d, c, r, queries, seed);
  sann::write_dvec(out + ".points.dvec", inst.points);
  sann::write_dvec(out + ".queries.dvec", inst.queries);
  json meta;
  meta["n"] = n;
  meta["d"] = d;
  meta["c"] = c;
  meta["r"] = r;
  meta["queries"] = queries;
  meta["seed"] = seed;
  meta["planted"] = inst.planted;
  meta["far_fraction"] = inst.far_fraction;
  std::ofstream mf(out + ".meta.json");
  mf << meta.dump(2) << "\n";
  std::cout << "wrote " << out << ".points.dvec, .queries.dvec, .meta.json\n";
  return 0;
}

int cmd_build(const std::string& data, const ParamFlags& flags, std::uint32_t trees,
              const std::string& out) {
  const sann::BuildParams raw = flags.resolve();
  std::vector<sann::Point> points = sann::read_dvec(data);
  const std::uint32_t num_trees =
      trees ? trees : sann::default_num_trees(points.size(), raw.c);
  sann::PreparedDataset prep = sann::prepare_dataset(points, raw);
  sann::Forest forest =
      sann::build_forest(std::move(prep.indexed_points), prep.params, num_trees,
                         prep.meta, std::move(prep.verify_points),
                         sann::declared_workers());
  sann::save_forest(forest, out);
  std::cout << "built " << num_trees << " trees over " << points.size()
            << " points (indexed dim " << forest.meta.indexed_dim << ") -> " << out
            << "\n";
  return 0;
}

int cmd_query(const std::string& index_path, const std::string& queries_path,
              const std::string& out_csv) {
  sann::Forest forest = sann::load_forest(index_path);
  std::vector<sann::Point> queries = sann::read_dvec(queries_path);
  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot open " + out_csv);
  out << "query,returned,dist,candidates,nodes,ball_depth\n";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    sann::QueryStats stats;
    const auto hit = sann::query_forest(forest, queries[i], &stats);
    double dist = -1.0;
    if (hit) {
      const sann::Point qv = forest.to_verify(queries[i]);
      dist = sann::distance(forest.verify.by_id(*hit).coords, qv.coords);
    }
    out << i << "," << (hit ? static_cast<std::int64_t>(*hit) : -1) << "," << dist
        << "," << stats.candidates_examined << "," << stats.nodes_visited << ","
        << stats.ball_depth_max << "\n";
  }
  std::cout << "answered " << queries.size() << " queries -> " << out_csv << "\n";
  return 0;
}

int cmd_recall(const std::string& data, const std::string& queries,
               const ParamFlags& flags, std::uint32_t trees, const std::string& report,
               double min_recall) {
  const sann::BuildParams raw = flags.resolve();
  sann::RandomInstance inst;
  inst.points = sann::read_dvec(data);
  inst.queries = sann::read_dvec(queries);
  inst.planted.assign(inst.queries.size(), 0);
  inst.c = raw.c;
  inst.r = raw.r;
  inst.dim = inst.points.empty() ? 0 : static_cast<std::uint32_t>(inst.points[0].coords.size());
  const std::uint32_t num_trees =
      trees ? trees : sann::default_num_trees(inst.points.size(), raw.c);
  sann::ExperimentReport rep =
      sann::run_recall(inst, raw, num_trees, sann::declared_workers());
  rep.write(report, report.empty() ? "" : report + ".csv");
  std::cout << "recall=" << rep.metrics.at("recall")
            << " mean_candidates=" << rep.metrics.at("mean_candidates")
            << " build_s=" << rep.metrics.at("time_build_seconds") << "\n";
  if (min_recall > 0.0 && rep.metrics.at("recall") < min_recall) return 1;
  return 0;
}

int cmd_collisions(std::uint32_t d, std::uint64_t trials, std::uint64_t seed,
                   const std::string& out_csv) {
  sann::ExperimentReport rep =
      sann::run_collision_suite(d, trials, seed, sann::declared_workers());
  rep.write(out_csv.empty() ? "" : out_csv + ".json", out_csv);
  for (const auto& [name, ok] : rep.checks)
    std::cout << (ok ? "[pass] " : "[info] ") << name << "\n";
  std::cout << "rows=" << rep.csv_rows.size() << (out_csv.empty() ? "" : " -> " + out_csv)
            << "\n";
  return 0;
}

int cmd_vdc(std::uint32_t sets, std::uint32_t size, std::vector<double> eps,
            std::uint64_t seed, const std::string& out_csv) {
  if (eps.empty()) eps = {0.1, 0.2, 0.4};
  sann::ExperimentReport rep = sann::run_vdc_suite(sets, size, eps, seed);
  rep.write(out_csv.empty() ? "" : out_csv + ".json", out_csv);
  std::cout << "violations=" << rep.metrics.at("violations")
            << " worst_ratio=" << rep.metrics.at("worst_ratio") << "\n";
  return rep.all_checks_pass() ? 0 : 1;
}

int cmd_selftest(std::uint64_t seed) {
  sann::ExperimentReport rep = sann::run_selftest(seed, sann::declared_workers());
  bool all = true;
  for (const auto& [name, ok] : rep.checks) {
    std::cout << (ok ? "[pass] " : "[FAIL] ") << name << "\n";
    all = all && ok;
  }
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spherical data-dependent LSH index and experiment harness"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a random planted instance");
  std::uint32_t g_n = 2000, g_d = 256, g_q = 200;
  double g_c = 2.0, g_r = 1.0;
  std::uint64_t g_seed = 1;
  std::string g_out = "instance";
  gen->add_option("--n", g_n, "points");
  gen->add_option("--d", g_d, "dimension");
  gen->add_option("--c", g_c, "approximation factor");
  gen->add_option("--r", g_r, "near threshold");
  gen->add_option("--queries", g_q, "query count");
  gen->add_option("--seed", g_seed, "seed");
  gen->add_option("--out", g_out, "output prefix");

  // build
  auto* build = app.add_subcommand("build", "build a forest index");
  std::string b_data, b_out = "index.sann";
  std::uint32_t b_trees = 0;
  ParamFlags b_flags;
  build->add_option("--data", b_data, "points dvec")->required();
  build->add_option("--trees", b_trees, "tree count (0 = default)");
  build->add_option("--out", b_out, "output index file");
  b_flags.attach(build);

  // query
  auto* query = app.add_subcommand("query", "answer queries from an index file");
  std::string q_index, q_queries, q_csv = "answers.csv";
  query->add_option("--index", q_index, "index file")->required();
  query->add_option("--queries", q_queries, "queries dvec")->required();
  query->add_option("--out-csv", q_csv, "output csv");

  // recall
  auto* recall = app.add_subcommand("recall", "end-to-end recall benchmark");
  std::string r_data, r_queries, r_report = "recall.json";
  std::uint32_t r_trees = 0;
  double r_min = 0.0;
  ParamFlags r_flags;
  recall->add_option("--data", r_data, "points dvec")->required();
  recall->add_option("--queries", r_queries, "queries dvec")->required();
  recall->add_option("--trees", r_trees, "tree count (0 = default)");
  recall->add_option("--report", r_report, "report json path");
  recall->add_option("--min-recall", r_min, "exit nonzero below this recall");
  r_flags.attach(recall);

  // collisions
  auto* coll = app.add_subcommand("collisions", "collision-probability experiments");
  std::uint32_t c_d = 100;
  std::uint64_t c_trials = 100000, c_seed = 1;
  std::string c_csv = "collisions.csv";
  coll->add_option("--d", c_d, "dimension");
  coll->add_option("--trials", c_trials, "Monte Carlo trials");
  coll->add_option("--seed", c_seed, "seed");
  coll->add_option("--out-csv", c_csv, "output csv");

  // vdc
  auto* vdc = app.add_subcommand("vdc", "covered-cap center guarantee suite");
  std::uint32_t v_sets = 100, v_size = 256;
  std::vector<double> v_eps;
  std::uint64_t v_seed = 1;
  std::string v_csv = "vdc.csv";
  vdc->add_option("--sets", v_sets, "sets per eps");
  vdc->add_option("--size", v_size, "points per set");
  vdc->add_option("--eps", v_eps, "eps grid");
  vdc->add_option("--seed", v_seed, "seed");
  vdc->add_option("--out-csv", v_csv, "output csv");

  // selftest
  auto* self = app.add_subcommand("selftest", "run the structural invariant suites");
  std::uint64_t s_seed = 1;
  self->add_option("--seed", s_seed, "seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(g_n, g_d, g_c, g_r, g_q, g_seed, g_out);
    if (build->parsed()) return cmd_build(b_data, b_flags, b_trees, b_out);
    if (query->parsed()) return cmd_query(q_index, q_queries, q_csv);
    if (recall->parsed())
      return cmd_recall(r_data, r_queries, r_flags, r_trees, r_report, r_min);
    if (coll->parsed()) return cmd_collisions(c_d, c_trials, c_seed, c_csv);
    if (vdc->parsed()) return cmd_vdc(v_sets, v_size, v_eps, v_seed, v_csv);
    if (self->parsed()) return cmd_selftest(s_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <optional>

#include "sann/harness.hpp"

namespace py = pybind11;
using namespace sann;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Point> points_from_array(const DoubleArray& arr) {
  if (arr.ndim() != 2) throw std::invalid_argument("expected a 2-D array (n x d)");
  const auto n = static_cast<std::size_t>(arr.shape(0));
  const auto d = static_cast<std::size_t>(arr.shape(1));
  std::vector<Point> pts(n);
  const double* data = arr.data();
  for (std::size_t i = 0; i < n; ++i) {
    pts[i].id = static_cast<std::uint32_t>(i);
    pts[i].coords.assign(data + i * d, data + (i + 1) * d);
  }
  return pts;
}

Point point_from_array(const DoubleArray& arr) {
  if (arr.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
  Point p;
  p.coords.assign(arr.data(), arr.data() + arr.shape(0));
  return p;
}

py::array_t<double> array_from_points(const std::vector<Point>& pts) {
  const std::size_t n = pts.size();
  const std::size_t d = n ? pts[0].coords.size() : 0;
  py::array_t<double> out({n, d});
  double* data = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    std::copy(pts[i].coords.begin(), pts[i].coords.end(), data + i * d);
  return out;
}

BuildParams params_from_kwargs(const py::kwargs& kw) {
  BuildParams p;
  for (auto item : kw) {
    const std::string key = py::cast<std::string>(item.first);
    if (key == "c") p.c = py::cast<double>(item.second);
    else if (key == "r") p.r = py::cast<double>(item.second);
    else if (key == "eps") p.eps = py::cast<double>(item.second);
    else if (key == "delta") p.delta = py::cast<double>(item.second);
    else if (key == "tau") p.tau = py::cast<double>(item.second);
    else if (key == "leaf_cutoff") p.leaf_cutoff = py::cast<std::uint32_t>(item.second);
    else if (key == "max_ball_depth") p.max_ball_depth = py::cast<std::uint32_t>(item.second);
    else if (key == "max_run_length") p.max_run_length = py::cast<std::uint32_t>(item.second);
    else if (key == "sample_threshold") p.sample_threshold = py::cast<std::uint32_t>(item.second);
    else if (key == "cluster_floor") p.cluster_floor = py::cast<std::uint32_t>(item.second);
    else if (key == "d_target") p.d_target = py::cast<std::uint32_t>(item.second);
    else if (key == "seed") p.seed = py::cast<std::uint64_t>(item.second);
    else throw std::invalid_argument("unknown build parameter: " + key);
  }
  return p;
}

py::dict estimate_to_dict(const CollisionEstimate& e) {
  py::dict d;
  d["p_hat"] = e.p_hat;
  d["trials"] = e.trials;
  d["std_err"] = e.std_err;
  return d;
}

class PyIndex {
 public:
  explicit PyIndex(Forest forest) : forest_(std::move(forest)) {}

  static std::unique_ptr<PyIndex> build(const DoubleArray& data,
                                        std::uint32_t num_trees,
                                        const py::kwargs& kw) {
    BuildParams raw = params_from_kwargs(kw);
    std::vector<Point> pts = points_from_array(data);
    if (num_trees == 0) num_trees = default_num_trees(pts.size(), raw.c);
    PreparedDataset prep = prepare_dataset(pts, raw);
    return std::make_unique<PyIndex>(
        build_forest(std::move(prep.indexed_points), prep.params, num_trees, prep.meta,
                     std::move(prep.verify_points), declared_workers()));
  }

  py::tuple query(const DoubleArray& q) const {
    QueryStats stats;
    auto hit = query_forest(forest_, point_from_array(q), &stats);
    py::dict st;
    st["nodes_visited"] = stats.nodes_visited;
    st["candidates_examined"] = stats.candidates_examined;
    st["distance_computations"] = stats.distance_computations;
    st["ball_depth_max"] = stats.ball_depth_max;
    if (hit) return py::make_tuple(py::int_(*hit), st);
    return py::make_tuple(py::none(), st);
  }

  void save(const std::string& path) const { save_forest(forest_, path); }
  static std::unique_ptr<PyIndex> load(const std::string& path) {
    return std::make_unique<PyIndex>(load_forest(path));
  }

  std::size_t size() const { return forest_.store.size(); }
  std::uint32_t num_trees() const {
    return static_cast<std::uint32_t>(forest_.trees.size());
  }
  std::uint32_t indexed_dim() const { return forest_.meta.indexed_dim; }

  py::dict audit() const {
    bool covered = true, gap = true;
    std::uint32_t depth = 0;
    std::uint64_t refs = 0;
    for (const NodePtr& tree : forest_.trees) {
      TreeAudit a = audit_tree(*tree, forest_.store, forest_.params);
      covered = covered && a.covered_all;
      gap = gap && a.gap_ratio_ok;
      depth = std::max(depth, a.max_ball_depth);
      refs += a.total_refs;
    }
    py::dict d;
    d["covered_all"] = covered;
    d["gap_ratio_ok"] = gap;
    d["max_ball_depth"] = depth;
    d["total_refs"] = refs;
    return d;
  }

 private:
  Forest forest_;
};

}  // namespace

PYBIND11_MODULE(_sann, m) {
  m.doc() = "data-dependent spherical LSH index for approximate near neighbors";

  m.def("predicted_log_inv_collision", &predicted_log_inv_collision, py::arg("tau"),
        py::arg("d"),
        "tau^2/(4-tau^2)*sqrt(d)/2, the ideal ln(1/Pr[collision]) at distance tau");
  m.def(
      "gaussian_tail_bounds",
      [](double t) {
        TailBounds b = gaussian_tail_bounds(t);
        return py::make_tuple(b.lower, b.upper);
      },
      py::arg("t"), "two-sided bound on Pr[N(0,1) >= t], valid for t > 1");
  m.def("project_between_spheres", &project_between_spheres, py::arg("r1"),
        py::arg("r2"), py::arg("chord"));
  m.def("default_T", &default_T, py::arg("d"), py::arg("miss_bound") = 1e-6);
  m.def("default_num_trees", &default_num_trees, py::arg("n"), py::arg("c"));
  m.def("jl_default_target", &jl_default_target, py::arg("n"));

  m.def(
      "estimate_pair_collision",
      [](double tau, std::uint32_t d, std::uint64_t trials, std::uint64_t seed,
         unsigned workers) {
        return estimate_to_dict(estimate_pair_collision(tau, d, trials, seed, workers));
      },
      py::arg("tau"), py::arg("d"), py::arg("trials"), py::arg("seed"),
      py::arg("workers") = 1);
  m.def(
      "estimate_conditional_collision",
      [](double tuv, double tuw, double tvw, std::uint32_t d, std::uint64_t trials,
         std::uint64_t seed, unsigned workers) {
        return estimate_to_dict(
            estimate_conditional_collision(tuv, tuw, tvw, d, trials, seed, workers));
      },
      py::arg("tau_uv"), py::arg("tau_uw"), py::arg("tau_vw"), py::arg("d"),
      py::arg("trials"), py::arg("seed"), py::arg("workers") = 1);
  m.def(
      "estimate_grid_collision",
      [](double tau, std::uint32_t d, std::uint64_t trials, std::uint64_t seed,
         unsigned workers) {
        return estimate_to_dict(estimate_grid_collision(tau, d, trials, seed, workers));
      },
      py::arg("tau"), py::arg("d"), py::arg("trials"), py::arg("seed"),
      py::arg("workers") = 1);

  m.def(
      "smallest_enclosing_ball",
      [](const DoubleArray& arr, double tol) {
        Ball b = smallest_enclosing_ball(points_from_array(arr), tol);
        return py::make_tuple(py::cast(b.center), b.radius);
      },
      py::arg("points"), py::arg("tol") = 1e-3);
  m.def(
      "jl_reduce",
      [](const DoubleArray& arr, std::uint32_t target_d, std::uint64_t seed) {
        return array_from_points(jl_reduce(points_from_array(arr), target_d, seed));
      },
      py::arg("points"), py::arg("target_d"), py::arg("seed"));
  m.def(
      "hamming_embed",
      [](const std::vector<bool>& bits) {
        Point p = hamming_embed(bits);
        return py::cast(p.coords);
      },
      py::arg("bits"));
  m.def(
      "vdc_best_center",
      [](const DoubleArray& arr) {
        auto [id, score] = vdc_best_center(points_from_array(arr));
        return py::make_tuple(id, score);
      },
      py::arg("unit_points"));
  m.def(
      "find_dense_ball",
      [](const DoubleArray& arr, double radius, std::uint32_t min_count) -> py::object {
        auto c = find_dense_ball(points_from_array(arr), radius, min_count);
        if (!c) return py::none();
        py::dict d;
        d["center_id"] = c->center_id;
        d["members"] = c->members;
        d["radius"] = c->radius;
        return d;
      },
      py::arg("points"), py::arg("radius"), py::arg("min_count"));

  m.def(
      "gen_random_instance",
      [](std::uint32_t n, std::uint32_t d, double c, double r, std::uint32_t queries,
         std::uint64_t seed) {
        RandomInstance inst = gen_random_instance(n, d, c, r, queries, seed);
        py::dict out;
        out["points"] = array_from_points(inst.points);
        out["queries"] = array_from_points(inst.queries);
        out["planted"] = inst.planted;
        return out;
      },
      py::arg("n"), py::arg("d"), py::arg("c"), py::arg("r"), py::arg("queries"),
      py::arg("seed"));

  py::class_<PyIndex>(m, "Index")
      .def_static("build", &PyIndex::build, py::arg("points"), py::arg("num_trees") = 0,
                  "Build a forest over an (n x d) array. Keyword arguments mirror "
                  "the build parameters (c, r, eps, delta, tau, leaf_cutoff, "
                  "max_ball_depth, max_run_length, sample_threshold, cluster_floor, "
                  "d_target, seed).")
      .def_static("load", &PyIndex::load, py::arg("path"))
      .def("query", &PyIndex::query, py::arg("q"),
           "Returns (id or None, stats dict); the id is within c*r of the query.")
      .def("save", &PyIndex::save, py::arg("path"))
      .def("audit", &PyIndex::audit)
      .def_property_readonly("size", &PyIndex::size)
      .def_property_readonly("num_trees", &PyIndex::num_trees)
      .def_property_readonly("indexed_dim", &PyIndex::indexed_dim);
}

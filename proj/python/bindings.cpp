#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "otcd/change_detection.hpp"
#include "otcd/errors.hpp"
#include "otcd/evaluation.hpp"
#include "otcd/ot_solver.hpp"
#include "otcd/pointcloud_io.hpp"
#include "otcd/synthgen.hpp"

namespace py = pybind11;
using namespace otcd;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<Point3> to_points(const Points& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw DataError(std::string(what) + " must have shape (n, 3)");
  }
  const auto v = a.unchecked<2>();
  std::vector<Point3> out(static_cast<std::size_t>(a.shape(0)));
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[std::size_t(i)] = {v(i, 0), v(i, 1), v(i, 2)};
  return out;
}

py::array_t<double> from_points(const std::vector<Point3>& pts) {
  py::array_t<double> a({static_cast<py::ssize_t>(pts.size()), py::ssize_t{3}});
  auto v = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    v(py::ssize_t(i), 0) = pts[i].x;
    v(py::ssize_t(i), 1) = pts[i].y;
    v(py::ssize_t(i), 2) = pts[i].z;
  }
  return a;
}

std::vector<ChangeClass> to_classes(const Labels& a) {
  if (a.ndim() != 1) throw DataError("labels must be one-dimensional");
  std::vector<ChangeClass> out;
  out.reserve(std::size_t(a.size()));
  for (py::ssize_t i = 0; i < a.size(); ++i) out.push_back(change_class_from_int(a.data()[i]));
  return out;
}

py::array_t<std::uint8_t> from_classes(const std::vector<ChangeClass>& c) {
  py::array_t<std::uint8_t> a(static_cast<py::ssize_t>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) a.mutable_data()[i] = static_cast<std::uint8_t>(c[i]);
  return a;
}

py::object labels_or_none(const PointCloud& c) {
  return c.labels ? py::object(from_classes(*c.labels)) : py::object(py::none());
}

PointCloud make_cloud(const Points& pts, const std::optional<Labels>& labels) {
  PointCloud c;
  c.points = to_points(pts, "points");
  if (labels) c.labels = to_classes(*labels);
  validate(c);
  return c;
}

SolverConfig solver_config(double epsilon, double rho, int max_iter, double tol, bool log_domain) {
  SolverConfig cfg;
  cfg.epsilon = epsilon;
  cfg.rho = rho;
  cfg.max_iter = max_iter;
  cfg.tol = tol;
  cfg.log_domain = log_domain;
  return cfg;
}

py::dict plan_dict(TransportPlan p) {
  py::dict d;
  d["coupling"] = std::move(p.coupling);
  d["row_marginal"] = std::move(p.row_marginal);
  d["col_marginal"] = std::move(p.col_marginal);
  d["converged"] = p.converged;
  d["iterations"] = p.iterations;
  d["marginal_error"] = p.marginal_error;
  return d;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["unchanged"] = m.iou_per_class[0];
  d["new"] = m.iou_per_class[1];
  d["demolished"] = m.iou_per_class[2];
  d["mean_change_iou"] = m.mean_change_iou;
  return d;
}

ChangeDetectionConfig pipeline_config(const std::string& method, std::optional<double> epsilon,
                                      std::optional<double> epsilon_rel, double rho, double tau,
                                      std::size_t point_cap, double halo, unsigned workers, int max_iter,
                                      double tol) {
  ChangeDetectionConfig cfg;
  cfg.method = parse_method(method);
  if (epsilon && epsilon_rel) throw ConfigError("pass either epsilon or epsilon_rel, not both");
  if (epsilon) {
    cfg.epsilon_rel.reset();
    cfg.solver.epsilon = *epsilon;
  } else {
    cfg.epsilon_rel = epsilon_rel.value_or(kDefaultEpsilonRel);
  }
  cfg.solver.rho = cfg.method == Method::kBalancedOt ? std::numeric_limits<double>::infinity() : rho;
  cfg.solver.max_iter = max_iter;
  cfg.solver.tol = tol;
  cfg.tau = tau;
  cfg.chunking.point_cap = point_cap;
  cfg.chunking.halo_margin = halo;
  cfg.workers = workers;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_otcd, m) {
  m.doc() = "Bi-temporal point cloud change detection with unbalanced optimal transport";

  // Translators are tried in reverse registration order: base classes first.
  const auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  const auto data_error = py::register_exception<DataError>(m, "DataError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<ParseError>(m, "ParseError", data_error.ptr());
  py::register_exception<NumericError>(m, "NumericError", error.ptr());
  py::register_exception<ResourceError>(m, "ResourceError", error.ptr());

  m.attr("UNCHANGED") = 0;
  m.attr("NEW") = 1;
  m.attr("DEMOLISHED") = 2;
  m.attr("DEFAULT_RHO") = kDefaultRho;
  m.attr("DEFAULT_EPSILON_REL") = kDefaultEpsilonRel;

  // --- io -------------------------------------------------------------------
  m.def(
      "read_cloud",
      [](const std::string& path) {
        const PointCloud c = read_cloud(path);
        return py::make_tuple(from_points(c.points), labels_or_none(c));
      },
      py::arg("path"), "Read .xyz or .ply; returns (points, labels or None).");
  m.def(
      "write_xyz",
      [](const std::string& path, const Points& pts, const std::optional<Labels>& labels) {
        write_xyz(path, make_cloud(pts, labels));
      },
      py::arg("path"), py::arg("points"), py::arg("labels") = py::none());

  // --- solver ---------------------------------------------------------------
  m.def(
      "cost_matrix",
      [](const Points& x0, const Points& x1) {
        return cost_matrix(to_points(x0, "x0"), to_points(x1, "x1")).values();
      },
      py::arg("x0"), py::arg("x1"), "Squared Euclidean cost, shape (n0, n1).");
  m.def(
      "sinkhorn",
      [](const Points& x0, const Points& x1, double epsilon, double rho, int max_iter, double tol,
         bool log_domain) {
        const SolverConfig cfg = solver_config(epsilon, rho, max_iter, tol, log_domain);
        const auto a = to_points(x0, "x0"), b = to_points(x1, "x1");
        TransportPlan p;
        {
          py::gil_scoped_release release;
          p = std::isinf(rho) ? sinkhorn_balanced(a, b, cfg) : sinkhorn_unbalanced(a, b, cfg);
        }
        return plan_dict(std::move(p));
      },
      py::arg("x0"), py::arg("x1"), py::arg("epsilon"), py::arg("rho") = std::numeric_limits<double>::infinity(),
      py::arg("max_iter") = 5000, py::arg("tol") = 1e-6, py::arg("log_domain") = true,
      "Entropic OT between two point sets; rho=inf is balanced, finite rho relaxes the source marginal.");
  m.def(
      "sinkhorn_cost",
      [](const RowMatrix& cost, double epsilon, double rho, int max_iter, double tol, bool log_domain) {
        const SolverConfig cfg = solver_config(epsilon, rho, max_iter, tol, log_domain);
        const CostMatrix c(cost);
        TransportPlan p;
        {
          py::gil_scoped_release release;
          p = std::isinf(rho) ? sinkhorn_balanced(c, cfg) : sinkhorn_unbalanced(c, cfg);
        }
        return plan_dict(std::move(p));
      },
      py::arg("cost"), py::arg("epsilon"), py::arg("rho") = std::numeric_limits<double>::infinity(),
      py::arg("max_iter") = 5000, py::arg("tol") = 1e-6, py::arg("log_domain") = true);
  m.def(
      "exact_ot",
      [](const RowMatrix& cost, const std::vector<double>& mu0, const std::vector<double>& mu1) {
        ExactPlan e = lp_exact_small(CostMatrix(cost), mu0, mu1);
        return py::make_tuple(e.cost, std::move(e.plan));
      },
      py::arg("cost"), py::arg("mu0"), py::arg("mu1"), "Exact transport for tiny problems: (cost, plan).");

  // --- pipeline -------------------------------------------------------------
  m.def(
      "detect_changes",
      [](const Points& x0, const Points& x1, const std::string& method, std::optional<double> epsilon,
         std::optional<double> epsilon_rel, double rho, double tau, std::size_t point_cap, double halo,
         unsigned workers, int max_iter, double tol) {
        const ChangeDetectionConfig cfg =
            pipeline_config(method, epsilon, epsilon_rel, rho, tau, point_cap, halo, workers, max_iter, tol);
        PointCloud pc0, pc1;
        pc0.points = to_points(x0, "x0");
        pc1.points = to_points(x1, "x1");
        DetectionResult r;
        {
          py::gil_scoped_release release;
          r = detect_changes(pc0, pc1, cfg);
        }
        py::dict d;
        d["scores"] = py::array_t<double>(py::ssize_t(r.map.scores.size()), r.map.scores.data());
        d["distances"] = py::array_t<double>(py::ssize_t(r.map.distances.size()), r.map.distances.data());
        d["classes"] = from_classes(r.map.classes);
        d["chunks"] = r.chunks.size();
        d["non_converged"] = r.non_converged();
        d["halo_over_cap"] = r.halo_over_cap();
        return d;
      },
      py::arg("x0"), py::arg("x1"), py::kw_only(), py::arg("method") = "uot", py::arg("epsilon") = py::none(),
      py::arg("epsilon_rel") = py::none(), py::arg("rho") = kDefaultRho, py::arg("tau") = 1.0,
      py::arg("point_cap") = ChunkingConfig{}.point_cap, py::arg("halo") = 0.0, py::arg("workers") = 0u,
      py::arg("max_iter") = SolverConfig{}.max_iter, py::arg("tol") = SolverConfig{}.tol,
      "Score and classify every epoch-1 point. Returns scores, distances, classes and chunk diagnostics.");

  // --- evaluation -----------------------------------------------------------
  m.def(
      "confusion",
      [](const Labels& gt, const Labels& pred) {
        const ConfusionMatrix cm = confusion(to_classes(gt), to_classes(pred));
        py::array_t<std::uint64_t> a({kNumClasses, kNumClasses});
        auto v = a.mutable_unchecked<2>();
        for (int g = 0; g < kNumClasses; ++g)
          for (int p = 0; p < kNumClasses; ++p) v(g, p) = cm.counts[g][p];
        return a;
      },
      py::arg("gt"), py::arg("pred"), "counts[g, p]: ground truth g predicted as p.");
  m.def(
      "iou", [](const Labels& gt, const Labels& pred) { return metrics_dict(iou(confusion(to_classes(gt), to_classes(pred)))); },
      py::arg("gt"), py::arg("pred"));
  m.def(
      "sweep_scores",
      [](const std::vector<double>& scores, const Labels& gt, std::optional<std::vector<double>> grid) {
        const std::vector<double> taus = grid.value_or(default_tau_grid());
        const SweepResult s = sweep_scores(scores, to_classes(gt), taus);
        py::list curve;
        for (const SweepPoint& p : s.curve) curve.append(py::make_tuple(p.tau, p.metrics.mean_change_iou));
        py::dict d = metrics_dict(s.best);
        d["tau"] = s.best_tau;
        d["curve"] = curve;
        return d;
      },
      py::arg("scores"), py::arg("gt"), py::arg("tau_grid") = py::none(),
      "Best tau over the grid (default 0.5 to 10 m) by mean change IoU.");

  // --- synthetic scenes -----------------------------------------------------
  m.def("preset_names", &preset_names);
  m.def(
      "synth",
      [](const std::string& name, std::optional<std::uint64_t> seed) {
        SceneSpec spec = preset(name);
        if (seed) spec.seed = *seed;
        const ScenePair p = generate_pair(spec);
        return py::make_tuple(from_points(p.pc0.points), from_points(p.pc1.points), labels_or_none(p.pc1));
      },
      py::arg("preset"), py::arg("seed") = py::none(), "Preset scene pair: (t0 points, t1 points, t1 labels).");
}

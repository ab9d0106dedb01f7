#include "otcd/change_detection.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ChunkOutput {
  std::vector<double> scores;
  std::vector<ChangeClass> classes;
  std::vector<double> distances;
  ChunkDiagnostics diag;
};

std::vector<Point3> gather(const std::vector<Point3>& pts, const std::vector<std::size_t>& idx) {
  std::vector<Point3> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(pts[i]);
  return out;
}

PointScores nearest_neighbor_scores(std::span<const Point3> x0, std::span<const Point3> x1) {
  PointScores out;
  out.scores.resize(x1.size());
  out.distances.resize(x1.size());
  for (std::size_t j = 0; j < x1.size(); ++j) {
    double best = kInf;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double d = squared_distance(x0[i], x1[j]);
      if (d < best) {
        best = d;
        arg = i;
      }
    }
    out.scores[j] = x1[j].z - x0[arg].z;
    out.distances[j] = std::sqrt(best);
  }
  return out;
}

ChunkOutput process_chunk(const PointCloud& pc0, const PointCloud& pc1, const ChunkPair& chunk,
                          const ChangeDetectionConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ChunkOutput out;
  out.diag.chunk_id = chunk.chunk_id;
  out.diag.n0 = chunk.source_indices.size();
  out.diag.n1 = chunk.target_indices.size();
  out.diag.no_sources = chunk.no_sources;
  out.diag.halo_over_cap = chunk.halo_over_cap;

  const std::vector<Point3> x1 = gather(pc1.points, chunk.target_indices);
  PointScores ps;
  if (chunk.source_indices.empty()) {
    ps.scores.assign(x1.size(), kInf);
    ps.distances.assign(x1.size(), kInf);
  } else {
    const std::vector<Point3> x0 = gather(pc0.points, chunk.source_indices);
    if (cfg.method == Method::kNnBaseline) {
      ps = nearest_neighbor_scores(x0, x1);
      out.diag.peak_bytes_estimate = (x0.size() + x1.size()) * sizeof(Point3);
    } else {
      SolverConfig scfg = cfg.solver;
      if (cfg.epsilon_rel) {
        const double med = median_squared_distance(x0, x1);
        scfg.epsilon = *cfg.epsilon_rel * (med > 0.0 ? med : 1.0);
      }
      out.diag.epsilon = scfg.epsilon;
      out.diag.peak_bytes_estimate = solver_peak_bytes(x0.size(), x1.size(), false);
      const TransportPlan plan = cfg.method == Method::kBalancedOt ? sinkhorn_balanced(x0, x1, scfg)
                                                                   : sinkhorn_unbalanced(x0, x1, scfg);
      out.diag.iterations = plan.iterations;
      out.diag.converged = plan.converged;
      out.diag.marginal_error = plan.marginal_error;
      ps = pointwise_scores(barycentric_projection(plan, x0), x1);
    }
  }
  out.classes = classify(ps.scores, cfg.tau);
  out.scores = std::move(ps.scores);
  out.distances = std::move(ps.distances);
  out.diag.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::kUnbalancedOt:
      return "unbalanced_ot";
    case Method::kBalancedOt:
      return "balanced_ot";
    case Method::kNnBaseline:
      return "nn_baseline";
  }
  return "invalid";
}

Method parse_method(const std::string& name) {
  if (name == "uot" || name == "unbalanced_ot") return Method::kUnbalancedOt;
  if (name == "ot" || name == "balanced_ot") return Method::kBalancedOt;
  if (name == "nn" || name == "nn_baseline") return Method::kNnBaseline;
  throw ConfigError("unknown method '" + name + "' (expected uot, ot or nn)");
}

void validate(const ChangeDetectionConfig& cfg) {
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw ConfigError("tau must be positive and finite");
  validate(cfg.chunking);
  if (cfg.method == Method::kNnBaseline) return;
  if (cfg.epsilon_rel && (!(*cfg.epsilon_rel > 0.0) || !std::isfinite(*cfg.epsilon_rel))) {
    throw ConfigError("epsilon_rel must be positive and finite");
  }
  validate(cfg.solver);
  if (cfg.method == Method::kUnbalancedOt && !std::isfinite(cfg.solver.rho)) {
    throw ConfigError("unbalanced OT needs a finite rho; use the balanced method for rho = infinity");
  }
}

PointScores pointwise_scores(std::span<const Point3> projected, std::span<const std::uint8_t> reached,
                             std::span<const Point3> x1) {
  if (projected.size() != x1.size() || reached.size() != x1.size()) {
    throw DataError("pointwise_scores: length mismatch");
  }
  PointScores out;
  out.scores.resize(x1.size());
  out.distances.resize(x1.size());
  for (std::size_t j = 0; j < x1.size(); ++j) {
    if (!reached[j]) {
      out.scores[j] = kInf;
      out.distances[j] = kInf;
      continue;
    }
    out.scores[j] = x1[j].z - projected[j].z;
    out.distances[j] = std::sqrt(squared_distance(projected[j], x1[j]));
  }
  return out;
}

PointScores pointwise_scores(const Projection& projection, std::span<const Point3> x1) {
  return pointwise_scores(projection.points, projection.reached, x1);
}

std::vector<ChangeClass> classify(std::span<const double> scores, double tau) {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  std::vector<ChangeClass> out(scores.size(), ChangeClass::kUnchanged);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > tau) {
      out[j] = ChangeClass::kNew;
    } else if (scores[j] < -tau) {
      out[j] = ChangeClass::kDemolished;
    }
  }
  return out;
}

std::size_t DetectionResult::non_converged() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.converged ? 0 : 1;
  return n;
}

std::size_t DetectionResult::halo_over_cap() const {
  std::size_t n = 0;
  for (const auto& c : chunks) n += c.halo_over_cap ? 1 : 0;
  return n;
}

DetectionResult detect_changes(const PointCloud& pc0, const PointCloud& pc1, const ChangeDetectionConfig& cfg) {
  validate(cfg);
  validate(pc0);
  validate(pc1);
  const std::vector<ChunkPair> chunks = build_chunks(pc0, pc1, cfg.chunking);

  std::vector<ChunkOutput> outputs(chunks.size());
  std::vector<std::exception_ptr> errors(chunks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next.fetch_add(1); k < chunks.size(); k = next.fetch_add(1)) {
      try {
        outputs[k] = process_chunk(pc0, pc1, chunks[k], cfg);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };

  unsigned workers = cfg.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, chunks.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<ChunkResult> results;
  results.reserve(chunks.size());
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    results.push_back({&chunks[k], outputs[k].scores, outputs[k].classes});
  }
  MergedScores merged = merge_scores(results, pc1.size());

  DetectionResult result;
  result.map.scores = std::move(merged.scores);
  result.map.classes = std::move(merged.classes);
  result.map.distances.assign(pc1.size(), 0.0);
  for (std::size_t k = 0; k < chunks.size(); ++k) {
    const auto& idx = chunks[k].target_indices;
    for (std::size_t t = 0; t < idx.size(); ++t) result.map.distances[idx[t]] = outputs[k].distances[t];
    result.chunks.push_back(outputs[k].diag);
  }
  return result;
}

std::vector<BenchRow> bench_solver(std::span<const std::size_t> sizes, int iters, std::uint64_t seed,
                                   const ChangeDetectionConfig& cfg) {
  if (iters < 1) throw ConfigError("bench iterations must be at least 1");
  if (cfg.method == Method::kNnBaseline) throw ConfigError("bench times the transport solvers, not nn_baseline");
  SolverConfig scfg = cfg.solver;
  scfg.max_iter = iters;
  // Never stop early, so timings compare the same per-iteration work.
  scfg.tol = std::numeric_limits<double>::min();

  std::vector<BenchRow> rows;
  for (std::size_t n : sizes) {
    if (n < 1) throw ConfigError("bench sizes must be positive");
    const double side = std::sqrt(static_cast<double>(n) / 2.0);
    std::mt19937_64 rng(seed + n);
    std::uniform_real_distribution<double> uxy(0.0, side);
    std::normal_distribution<double> nz(0.0, 0.05);
    std::vector<Point3> x0(n), x1(n);
    for (auto& p : x0) p = {uxy(rng), uxy(rng), nz(rng)};
    for (auto& p : x1) p = {uxy(rng), uxy(rng), nz(rng)};

    const auto start = std::chrono::steady_clock::now();
    if (cfg.epsilon_rel) scfg.epsilon = *cfg.epsilon_rel * median_squared_distance(x0, x1);
    const TransportPlan plan = cfg.method == Method::kBalancedOt ? sinkhorn_balanced(x0, x1, scfg)
                                                                 : sinkhorn_unbalanced(x0, x1, scfg);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rows.push_back({n, ms, plan.iterations, solver_peak_bytes(n, n, false)});
  }
  return rows;
}

}  // namespace otcd

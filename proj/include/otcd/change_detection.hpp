#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "otcd/chunking.hpp"
#include "otcd/ot_solver.hpp"
#include "otcd/point_cloud.hpp"

namespace otcd {

enum class Method {
  kUnbalancedOt,
  kBalancedOt,
  kNnBaseline,
};

const char* method_name(Method m);
// Accepts "uot"/"unbalanced_ot", "ot"/"balanced_ot", "nn"/"nn_baseline".
Method parse_method(const std::string& name);

// Pipeline defaults, chosen by the threshold sweeps on the synthetic presets.
inline constexpr double kDefaultRho = 100.0;
inline constexpr double kDefaultEpsilonRel = 0.1;

struct ChangeDetectionConfig {
  // rho is ignored by the balanced method.
  SolverConfig solver{.rho = kDefaultRho};
  // When set, each chunk uses epsilon = epsilon_rel * median(C_chunk) and
  // solver.epsilon is ignored.
  std::optional<double> epsilon_rel = kDefaultEpsilonRel;
  ChunkingConfig chunking;
  double tau = 1.0;
  Method method = Method::kUnbalancedOt;
  // Chunk-level worker threads; 0 means std::thread::hardware_concurrency().
  unsigned workers = 0;
};

void validate(const ChangeDetectionConfig& cfg);

// Per pc_1 point. scores are signed vertical residuals (+inf for targets no
// source mass reached); distances are the unsigned 3D projection distances.
struct ChangeMap {
  std::vector<double> scores;
  std::vector<ChangeClass> classes;
  std::vector<double> distances;
};

struct PointScores {
  std::vector<double> scores;
  std::vector<double> distances;
};

// scores[j] = X1[j].z - proj[j].z, distances[j] = |proj[j] - X1[j]| for
// reached targets; +inf for both where reached[j] == 0.
PointScores pointwise_scores(std::span<const Point3> projected, std::span<const std::uint8_t> reached,
                             std::span<const Point3> x1);
PointScores pointwise_scores(const Projection& projection, std::span<const Point3> x1);

// score > tau -> new, score < -tau -> demolished, otherwise unchanged.
// Throws ConfigError unless tau > 0.
std::vector<ChangeClass> classify(std::span<const double> scores, double tau);

struct ChunkDiagnostics {
  int chunk_id = 0;
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  int iterations = 0;
  bool converged = true;
  double wall_ms = 0.0;
  std::size_t peak_bytes_estimate = 0;
  double epsilon = 0.0;
  double marginal_error = 0.0;
  bool no_sources = false;
  bool halo_over_cap = false;
};

struct DetectionResult {
  ChangeMap map;
  std::vector<ChunkDiagnostics> chunks;

  std::size_t non_converged() const;
  std::size_t halo_over_cap() const;
};

// Chunk, solve, project, score, classify and merge. Chunks run on a pool
// of cfg.workers threads; the output does not depend on the worker count.
DetectionResult detect_changes(const PointCloud& pc0, const PointCloud& pc1, const ChangeDetectionConfig& cfg);

struct BenchRow {
  std::size_t n = 0;
  double wall_ms = 0.0;
  int iterations = 0;
  std::size_t peak_bytes_estimate = 0;
};

// Times one dense n x n solve per size on a flat synthetic ground patch
// (about 2 points per square meter), running exactly `iters` iterations.
// Uses cfg.method, cfg.solver and cfg.epsilon_rel.
std::vector<BenchRow> bench_solver(std::span<const std::size_t> sizes, int iters, std::uint64_t seed,
                                   const ChangeDetectionConfig& cfg);

}  // namespace otcd

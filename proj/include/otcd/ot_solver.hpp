#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "otcd/point_cloud.hpp"

namespace otcd {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense nonnegative cost between n0 sources (rows) and n1 targets (columns).
class CostMatrix {
 public:
  // Throws DataError if empty or if any entry is negative or non-finite.
  explicit CostMatrix(RowMatrix values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const RowMatrix& values() const { return values_; }

 private:
  RowMatrix values_;
};

// values[i][j] = |X0[i] - X1[j]|^2.
CostMatrix cost_matrix(std::span<const Point3> x0, std::span<const Point3> x1);

// Median of all entries (mean of the two middle values for an even count).
double median_cost(const CostMatrix& cost);

// Same quantity for the implicit squared-Euclidean cost between two point
// sets, computed without materializing the n0 x n1 matrix.
double median_squared_distance(std::span<const Point3> x0, std::span<const Point3> x1);

inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{16} << 30;

struct SolverConfig {
  // Entropic weight, squared meters.
  double epsilon = 1.0;
  // Weight of the KL penalty on the source marginal; infinity = balanced.
  double rho = std::numeric_limits<double>::infinity();
  int max_iter = 5000;
  // L1 marginal-violation threshold.
  double tol = 1e-6;
  bool log_domain = true;
  // Upper bound on the solver's dense working set. The solve also refuses to
  // start when the estimate exceeds the memory the system reports available.
  std::size_t memory_budget_bytes = kDefaultMemoryBudget;
};

// Throws ConfigError on epsilon <= 0, rho <= 0, tol <= 0 or max_iter < 1.
void validate(const SolverConfig& cfg);

struct TransportPlan {
  RowMatrix coupling;
  Eigen::VectorXd row_marginal;  // coupling * 1
  Eigen::VectorXd col_marginal;  // coupling^T * 1
  bool converged = false;
  int iterations = 0;
  // Final L1 violation of the hard constraint(s): both marginals for a
  // balanced solve, the target marginal for a semi-relaxed one.
  double marginal_error = 0.0;

  std::size_t n0() const { return static_cast<std::size_t>(coupling.rows()); }
  std::size_t n1() const { return static_cast<std::size_t>(coupling.cols()); }
  double transport_cost(const CostMatrix& cost) const;
};

// Peak bytes held by a dense solve of an n0 x n1 problem. `stores_cost`
// adds the cost matrix itself (the point-set overloads do not keep one).
std::size_t solver_peak_bytes(std::size_t n0, std::size_t n1, bool stores_cost);

// Entropic OT with uniform marginals 1/n0, 1/n1 (Sinkhorn scaling).
// Returns converged=false when max_iter is reached. Throws NumericError on
// NaN/overflow and ResourceError when the working set does not fit.
TransportPlan sinkhorn_balanced(const CostMatrix& cost, const SolverConfig& cfg);
TransportPlan sinkhorn_balanced(std::span<const Point3> x0, std::span<const Point3> x1, const SolverConfig& cfg);

// Semi-relaxed entropic OT: the target marginal 1/n1 is a hard constraint,
// the source marginal is penalized by rho * KL(P 1 | 1/n0). Requires a
// finite rho (ConfigError otherwise; use sinkhorn_balanced for rho = inf).
TransportPlan sinkhorn_unbalanced(const CostMatrix& cost, const SolverConfig& cfg);
TransportPlan sinkhorn_unbalanced(std::span<const Point3> x0, std::span<const Point3> x1, const SolverConfig& cfg);

struct ExactPlan {
  double cost = 0.0;
  RowMatrix plan;
  // Optimal dual potentials: u_i + v_j <= C_ij, equality on the support.
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

inline constexpr std::size_t kLpExactMaxEntries = 400;

// Exact min <P, C> over couplings with marginals mu0, mu1 (transportation
// simplex). Requires n0 * n1 <= 400 and sum(mu0) == sum(mu1).
ExactPlan lp_exact_small(const CostMatrix& cost, std::span<const double> mu0, std::span<const double> mu1);

struct Projection {
  std::vector<Point3> points;
  std::vector<double> reached_mass;
  std::vector<std::uint8_t> reached;  // 0 where column mass <= mass floor
};

// Column mass below which a target counts as unreached: 1e-3 / n1.
double mass_floor(std::size_t n1);

// points[j] = sum_i P_ij X0_i / sum_i P_ij for reached targets. Unreached
// targets keep their slot with reached[j] = 0 and a NaN-free zero point.
Projection barycentric_projection(const TransportPlan& plan, std::span<const Point3> x0);

}  // namespace otcd

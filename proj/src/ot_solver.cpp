#include "otcd/ot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "otcd/errors.hpp"

namespace otcd {
namespace {

using Eigen::ArrayXd;
using Eigen::VectorXd;

// Potentials are folded back into the kernel once exp(|delta| / eps) would
// exceed e^30.
constexpr double kAbsorbThreshold = 30.0;
// Kernel products below this are recomputed exactly in the log domain.
constexpr double kTinySum = 1e-280;

struct DenseCost {
  const RowMatrix& c;

  std::size_t rows() const { return static_cast<std::size_t>(c.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(c.cols()); }
  void row(std::size_t i, ArrayXd& out) const { out = c.row(static_cast<Eigen::Index>(i)).transpose().array(); }
};

// Squared Euclidean cost evaluated on the fly, one row at a time.
class PointCost {
 public:
  PointCost(std::span<const Point3> x0, std::span<const Point3> x1) : x0_(x0) {
    const auto n1 = static_cast<Eigen::Index>(x1.size());
    tx_.resize(n1);
    ty_.resize(n1);
    tz_.resize(n1);
    for (Eigen::Index j = 0; j < n1; ++j) {
      tx_[j] = x1[j].x;
      ty_[j] = x1[j].y;
      tz_[j] = x1[j].z;
    }
  }

  std::size_t rows() const { return x0_.size(); }
  std::size_t cols() const { return static_cast<std::size_t>(tx_.size()); }
  void row(std::size_t i, ArrayXd& out) const {
    const Point3& p = x0_[i];
    out = (tx_ - p.x).square() + (ty_ - p.y).square() + (tz_ - p.z).square();
  }

 private:
  std::span<const Point3> x0_;
  ArrayXd tx_, ty_, tz_;
};

std::size_t available_memory_bytes() {
  std::ifstream meminfo("/proc/meminfo");
  std::string key;
  std::size_t value = 0;
  std::string unit;
  while (meminfo >> key >> value >> unit) {
    if (key == "MemAvailable:") return value * 1024;
  }
  return 0;  // unknown
}

void check_memory(std::size_t n0, std::size_t n1, bool stores_cost, const SolverConfig& cfg) {
  const std::size_t need = solver_peak_bytes(n0, n1, stores_cost);
  auto gib = [](std::size_t b) {
    std::ostringstream s;
    s.precision(3);
    s << static_cast<double>(b) / static_cast<double>(std::size_t{1} << 30) << " GiB";
    return s.str();
  };
  const std::string shape = std::to_string(n0) + " x " + std::to_string(n1);
  if (need > cfg.memory_budget_bytes) {
    throw ResourceError("dense " + shape + " solve needs ~" + gib(need) + ", above the memory budget of " +
                        gib(cfg.memory_budget_bytes) + "; lower the chunk point cap");
  }
  const std::size_t avail = available_memory_bytes();
  if (avail > 0 && need > avail) {
    throw ResourceError("dense " + shape + " solve needs ~" + gib(need) + " but only " + gib(avail) +
                        " is available on this machine; lower the chunk point cap");
  }
}

// Generalized Sinkhorn in potential form. f, g are dual potentials; the
// current plan is P_ij = exp((f_i + g_j - C_ij) / eps). The kernel caches
// exp((f_ref_i + g_ref_j - C_ij) / eps), so that P = diag(u) K diag(v) with
// u = exp((f - f_ref) / eps), v = exp((g - g_ref) / eps).
template <typename Cost>
class ScalingSolver {
 public:
  ScalingSolver(const Cost& cost, const SolverConfig& cfg, bool balanced)
      : cost_(cost),
        cfg_(cfg),
        balanced_(balanced),
        n0_(cost.rows()),
        n1_(cost.cols()),
        eps_(cfg.epsilon),
        lambda_(balanced ? 1.0 : cfg.rho / (cfg.rho + cfg.epsilon)) {}

  TransportPlan run() {
    const double a = 1.0 / static_cast<double>(n0_);
    const double b = 1.0 / static_cast<double>(n1_);
    const double log_a = std::log(a);
    const double log_b = std::log(b);

    f_ = VectorXd::Zero(n0_);
    g_ = VectorXd::Zero(n1_);
    f_ref_ = f_;
    g_ref_ = g_;
    try {
      kernel_.resize(static_cast<Eigen::Index>(n0_), static_cast<Eigen::Index>(n1_));
    } catch (const std::bad_alloc&) {
      throw ResourceError("cannot allocate the " + std::to_string(n0_) + " x " + std::to_string(n1_) +
                          " transport kernel");
    }
    rebuild_kernel();

    VectorXd log_r(n0_), log_c(n1_);
    VectorXd r_prev;
    double row_change = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;

    for (int it = 0; it < cfg_.max_iter; ++it) {
      // Target potential: exact projection onto the hard column constraint.
      col_log_sums(log_c);
      if (!balanced_ && it > 0) {
        const double col_err = (log_c.array().exp() - b).abs().sum();
        if (col_err <= cfg_.tol && row_change <= cfg_.tol) {
          converged = true;
          break;
        }
      }
      g_.array() += eps_ * (log_b - log_c.array());
      check_finite(g_, it);
      maybe_absorb();

      // Source potential: exact for the balanced problem, damped by
      // rho / (rho + eps) under the KL penalty.
      row_log_sums(log_r);
      iterations = it + 1;
      if (balanced_) {
        const double row_err = (log_r.array().exp() - a).abs().sum();
        if (row_err <= cfg_.tol) {
          converged = true;
          break;
        }
      }
      VectorXd f_new = lambda_ * (eps_ * (log_a - log_r.array()) + f_.array()).matrix();
      check_finite(f_new, it);
      VectorXd r_after = (log_r.array() + (f_new - f_).array() / eps_).exp().matrix();
      if (r_prev.size() == r_after.size()) row_change = (r_after - r_prev).lpNorm<1>();
      r_prev = std::move(r_after);
      f_ = std::move(f_new);
      recenter(log_a);
      maybe_absorb();
    }

    return finish(converged, iterations);
  }

 private:
  void rebuild_kernel() {
    f_ref_ = f_;
    g_ref_ = g_;
    ArrayXd c(n1_);
    for (std::size_t i = 0; i < n0_; ++i) {
      cost_.row(i, c);
      kernel_.row(static_cast<Eigen::Index>(i)) = ((f_[i] + g_.array() - c) / eps_).exp().matrix().transpose();
    }
  }

  // (f + c, g - c) leaves the plan unchanged, but the damped source update
  // only contracts that direction by lambda per iteration, which stalls for
  // rho >> eps. Jump to the dual optimum along it instead:
  // sum_i a e^{-(f_i + c) / rho} = sum_j b = 1.
  void recenter(double log_a) {
    if (balanced_) return;
    const ArrayXd s = -f_.array() / cfg_.rho;
    const double m = s.maxCoeff();
    const double c = cfg_.rho * (log_a + m + std::log((s - m).exp().sum()));
    f_.array() += c;
    g_.array() -= c;
  }

  void maybe_absorb() {
    if (!cfg_.log_domain) return;
    const double df = n0_ ? (f_ - f_ref_).cwiseAbs().maxCoeff() : 0.0;
    const double dg = n1_ ? (g_ - g_ref_).cwiseAbs().maxCoeff() : 0.0;
    if (std::max(df, dg) / eps_ > kAbsorbThreshold) rebuild_kernel();
  }

  VectorXd scaling(const VectorXd& pot, const VectorXd& ref) const {
    return ((pot - ref).array() / eps_).exp().matrix();
  }

  // log of current row sums of P.
  void row_log_sums(VectorXd& out) {
    const VectorXd v = scaling(g_, g_ref_);
    const VectorXd kv = kernel_ * v;
    ArrayXd c;
    for (std::size_t i = 0; i < n0_; ++i) {
      const double s = kv[i];
      if (std::isfinite(s) && s > kTinySum) {
        out[i] = (f_[i] - f_ref_[i]) / eps_ + std::log(s);
        continue;
      }
      if (!cfg_.log_domain) numeric_failure("kernel row sum underflowed or overflowed");
      if (c.size() == 0) c.resize(n1_);
      cost_.row(i, c);
      const ArrayXd s_row = (f_[i] + g_.array() - c) / eps_;
      const double m = s_row.maxCoeff();
      out[i] = m + std::log((s_row - m).exp().sum());
    }
  }

  // log of current column sums of P.
  void col_log_sums(VectorXd& out) {
    const VectorXd u = scaling(f_, f_ref_);
    const VectorXd ktu = kernel_.transpose() * u;
    bool exact = false;
    for (std::size_t j = 0; j < n1_; ++j) {
      const double s = ktu[j];
      if (std::isfinite(s) && s > kTinySum) {
        out[j] = (g_[j] - g_ref_[j]) / eps_ + std::log(s);
      } else {
        exact = true;
      }
    }
    if (!exact) return;
    if (!cfg_.log_domain) numeric_failure("kernel column sum underflowed or overflowed");

    // Streaming log-sum-exp over rows for every column.
    ArrayXd m = ArrayXd::Constant(n1_, -std::numeric_limits<double>::infinity());
    ArrayXd acc = ArrayXd::Zero(n1_);
    ArrayXd c(n1_);
    for (std::size_t i = 0; i < n0_; ++i) {
      cost_.row(i, c);
      const ArrayXd s = (f_[i] + g_.array() - c) / eps_;
      const ArrayXd m_new = m.max(s);
      acc = acc * (m - m_new).exp() + (s - m_new).exp();
      m = m_new;
    }
    for (std::size_t j = 0; j < n1_; ++j) {
      const double s = ktu[j];
      if (!(std::isfinite(s) && s > kTinySum)) out[j] = m[j] + std::log(acc[j]);
    }
  }

  void check_finite(const VectorXd& v, int it) const {
    if (!v.allFinite()) numeric_failure("non-finite potential at iteration " + std::to_string(it));
  }

  [[noreturn]] void numeric_failure(const std::string& what) const {
    std::ostringstream msg;
    msg << "Sinkhorn numeric failure (" << what << ") with epsilon=" << eps_;
    msg << (cfg_.log_domain ? "; increase epsilon" : "; enable log_domain or increase epsilon");
    throw NumericError(msg.str());
  }

  TransportPlan finish(bool converged, int iterations) {
    if (cfg_.log_domain) {
      rebuild_kernel();
    } else {
      const VectorXd u = scaling(f_, f_ref_);
      const VectorXd v = scaling(g_, g_ref_);
      kernel_ = u.asDiagonal() * kernel_ * v.asDiagonal();
    }
    if (!kernel_.allFinite()) numeric_failure("non-finite coupling");

    TransportPlan plan;
    plan.coupling = std::move(kernel_);
    plan.row_marginal = plan.coupling.rowwise().sum();
    plan.col_marginal = plan.coupling.colwise().sum().transpose();
    plan.converged = converged;
    plan.iterations = iterations;
    const double a = 1.0 / static_cast<double>(n0_);
    const double b = 1.0 / static_cast<double>(n1_);
    plan.marginal_error = (plan.col_marginal.array() - b).abs().sum();
    if (balanced_) plan.marginal_error += (plan.row_marginal.array() - a).abs().sum();
    return plan;
  }

  const Cost& cost_;
  const SolverConfig& cfg_;
  const bool balanced_;
  const std::size_t n0_, n1_;
  const double eps_;
  const double lambda_;

  VectorXd f_, g_, f_ref_, g_ref_;
  RowMatrix kernel_;
};

template <typename Cost>
TransportPlan solve(const Cost& cost, const SolverConfig& cfg, bool balanced, bool stores_cost) {
  validate(cfg);
  if (!balanced && !std::isfinite(cfg.rho)) {
    throw ConfigError("sinkhorn_unbalanced needs a finite rho; use sinkhorn_balanced for rho = infinity");
  }
  if (cost.rows() == 0 || cost.cols() == 0) throw DataError("OT solve on an empty point set");
  check_memory(cost.rows(), cost.cols(), stores_cost, cfg);
  ScalingSolver<Cost> solver(cost, cfg, balanced);
  return solver.run();
}

}  // namespace

CostMatrix::CostMatrix(RowMatrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) throw DataError("cost matrix must be non-empty");
  if (!values_.allFinite()) throw DataError("cost matrix has non-finite entries");
  if ((values_.array() < 0.0).any()) throw DataError("cost matrix has negative entries");
}

CostMatrix cost_matrix(std::span<const Point3> x0, std::span<const Point3> x1) {
  if (x0.empty() || x1.empty()) throw DataError("cost_matrix: empty point set");
  const PointCost cost(x0, x1);
  RowMatrix values(static_cast<Eigen::Index>(x0.size()), static_cast<Eigen::Index>(x1.size()));
  ArrayXd row(x1.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    cost.row(i, row);
    values.row(static_cast<Eigen::Index>(i)) = row.matrix().transpose();
  }
  return CostMatrix(std::move(values));
}

double median_cost(const CostMatrix& cost) {
  std::vector<double> v(cost.values().data(), cost.values().data() + cost.values().size());
  const std::size_t n = v.size();
  const auto hi = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), hi, v.end());
  if (n % 2 == 1) return *hi;
  const double upper = *hi;
  const double lower = *std::max_element(v.begin(), hi);
  return 0.5 * (lower + upper);
}

double median_squared_distance(std::span<const Point3> x0, std::span<const Point3> x1) {
  if (x0.empty() || x1.empty()) throw DataError("median_squared_distance: empty point set");
  const PointCost cost(x0, x1);
  const std::size_t n = x0.size() * x1.size();
  ArrayXd row(x1.size());

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    cost.row(i, row);
    lo = std::min(lo, row.minCoeff());
    hi = std::max(hi, row.maxCoeff());
  }
  if (!(hi > lo)) return lo;

  // Histogram pass, then an exact selection inside the bins holding the
  // middle ranks.
  constexpr std::size_t kBins = std::size_t{1} << 16;
  const double scale = static_cast<double>(kBins) / (hi - lo);
  auto bin_of = [&](double d) {
    return std::min(kBins - 1, static_cast<std::size_t>((d - lo) * scale));
  };
  std::vector<std::size_t> counts(kBins, 0);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    cost.row(i, row);
    for (Eigen::Index j = 0; j < row.size(); ++j) ++counts[bin_of(row[j])];
  }

  const std::size_t rank_hi = n / 2;
  const std::size_t rank_lo = n % 2 == 1 ? rank_hi : rank_hi - 1;
  std::size_t bin_lo = 0, bin_hi = 0, below_lo = 0;
  {
    std::size_t cum = 0;
    bool found_lo = false;
    for (std::size_t k = 0; k < kBins; ++k) {
      if (!found_lo && cum + counts[k] > rank_lo) {
        bin_lo = k;
        below_lo = cum;
        found_lo = true;
      }
      if (cum + counts[k] > rank_hi) {
        bin_hi = k;
        break;
      }
      cum += counts[k];
    }
  }

  std::vector<double> window;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    cost.row(i, row);
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      const std::size_t k = bin_of(row[j]);
      if (k >= bin_lo && k <= bin_hi) window.push_back(row[j]);
    }
  }
  std::sort(window.begin(), window.end());
  const double v_lo = window[rank_lo - below_lo];
  const double v_hi = window[rank_hi - below_lo];
  return 0.5 * (v_lo + v_hi);
}

void validate(const SolverConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) throw ConfigError("epsilon must be positive and finite");
  if (!(cfg.rho > 0.0)) throw ConfigError("rho must be positive (or infinite)");
  if (!(cfg.tol > 0.0)) throw ConfigError("tol must be positive");
  if (cfg.max_iter < 1) throw ConfigError("max_iter must be at least 1");
}

double TransportPlan::transport_cost(const CostMatrix& cost) const {
  if (cost.rows() != n0() || cost.cols() != n1()) throw DataError("transport_cost: shape mismatch");
  return (coupling.array() * cost.values().array()).sum();
}

std::size_t solver_peak_bytes(std::size_t n0, std::size_t n1, bool stores_cost) {
  const std::size_t dense = n0 * n1 * sizeof(double);
  // Potentials, references, scalings and marginal work vectors.
  const std::size_t vectors = 12 * (n0 + n1) * sizeof(double);
  return dense * (stores_cost ? 2 : 1) + vectors;
}

TransportPlan sinkhorn_balanced(const CostMatrix& cost, const SolverConfig& cfg) {
  return solve(DenseCost{cost.values()}, cfg, /*balanced=*/true, /*stores_cost=*/true);
}

TransportPlan sinkhorn_balanced(std::span<const Point3> x0, std::span<const Point3> x1, const SolverConfig& cfg) {
  if (x0.empty() || x1.empty()) throw DataError("OT solve on an empty point set");
  return solve(PointCost(x0, x1), cfg, /*balanced=*/true, /*stores_cost=*/false);
}

TransportPlan sinkhorn_unbalanced(const CostMatrix& cost, const SolverConfig& cfg) {
  return solve(DenseCost{cost.values()}, cfg, /*balanced=*/false, /*stores_cost=*/true);
}

TransportPlan sinkhorn_unbalanced(std::span<const Point3> x0, std::span<const Point3> x1, const SolverConfig& cfg) {
  if (x0.empty() || x1.empty()) throw DataError("OT solve on an empty point set");
  return solve(PointCost(x0, x1), cfg, /*balanced=*/false, /*stores_cost=*/false);
}

double mass_floor(std::size_t n1) { return 1e-3 / static_cast<double>(n1); }

Projection barycentric_projection(const TransportPlan& plan, std::span<const Point3> x0) {
  if (plan.n0() != x0.size()) {
    throw DataError("barycentric_projection: plan has " + std::to_string(plan.n0()) + " rows but " +
                    std::to_string(x0.size()) + " source points");
  }
  const std::size_t n1 = plan.n1();
  Eigen::Matrix<double, Eigen::Dynamic, 3> src(static_cast<Eigen::Index>(x0.size()), 3);
  for (std::size_t i = 0; i < x0.size(); ++i) {
    src(static_cast<Eigen::Index>(i), 0) = x0[i].x;
    src(static_cast<Eigen::Index>(i), 1) = x0[i].y;
    src(static_cast<Eigen::Index>(i), 2) = x0[i].z;
  }
  const Eigen::Matrix<double, Eigen::Dynamic, 3> moved = plan.coupling.transpose() * src;
  const Eigen::VectorXd mass = plan.coupling.colwise().sum().transpose();
  const double floor = mass_floor(n1);

  Projection out;
  out.points.resize(n1);
  out.reached_mass.resize(n1);
  out.reached.resize(n1);
  for (std::size_t j = 0; j < n1; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out.reached_mass[j] = mass[jj];
    if (mass[jj] > floor) {
      out.points[j] = {moved(jj, 0) / mass[jj], moved(jj, 1) / mass[jj], moved(jj, 2) / mass[jj]};
      out.reached[j] = 1;
    }
  }
  return out;
}

}  // namespace otcd

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "otcd/errors.hpp"
#include "otcd/ot_solver.hpp"

namespace otcd {
namespace {

constexpr double kReducedCostTol = 1e-12;

// Transportation simplex (MODI) with Bland's rule for both the entering and
// the leaving cell. The basis is a spanning tree over m row nodes and n
// column nodes (column j is node m + j).
class TransportationSimplex {
 public:
  TransportationSimplex(const CostMatrix& cost, std::span<const double> mu0, std::span<const double> mu1)
      : c_(cost), m_(cost.rows()), n_(cost.cols()), x_(m_ * n_, 0.0), basic_(m_ * n_, 0) {
    north_west_corner(mu0, mu1);
  }

  ExactPlan solve() {
    const std::size_t max_pivots = 100000;
    for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
      compute_duals();
      std::size_t enter = m_ * n_;
      for (std::size_t k = 0; k < m_ * n_; ++k) {
        if (basic_[k]) continue;
        const std::size_t i = k / n_, j = k % n_;
        if (c_(i, j) - u_[i] - v_[j] < -kReducedCostTol) {
          enter = k;
          break;
        }
      }
      if (enter == m_ * n_) return result();
      pivot_on(enter);
    }
    throw NumericError("lp_exact_small: pivot limit reached");
  }

 private:
  void north_west_corner(std::span<const double> mu0, std::span<const double> mu1) {
    std::vector<double> supply(mu0.begin(), mu0.end());
    std::vector<double> demand(mu1.begin(), mu1.end());
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::min(supply[i], demand[j]);
      x_[i * n_ + j] = q;
      basic_[i * n_ + j] = 1;
      supply[i] -= q;
      demand[j] -= q;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (j == n_ - 1 || (i < m_ - 1 && supply[i] <= demand[j])) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(m_ + n_);
    for (std::size_t k = 0; k < m_ * n_; ++k) {
      if (!basic_[k]) continue;
      const std::size_t i = k / n_, j = k % n_;
      adj[i].push_back(m_ + j);
      adj[m_ + j].push_back(i);
    }
    return adj;
  }

  void compute_duals() {
    const auto adj = adjacency();
    std::vector<double> pot(m_ + n_, 0.0);
    std::vector<char> seen(m_ + n_, 0);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      const std::size_t a = q.front();
      q.pop();
      for (std::size_t b : adj[a]) {
        if (seen[b]) continue;
        const std::size_t i = a < m_ ? a : b;
        const std::size_t j = (a < m_ ? b : a) - m_;
        // u_i + v_j = C_ij on basic cells.
        pot[b] = c_(i, j) - pot[a];
        seen[b] = 1;
        q.push(b);
      }
    }
    u_.assign(pot.begin(), pot.begin() + static_cast<std::ptrdiff_t>(m_));
    v_.assign(pot.begin() + static_cast<std::ptrdiff_t>(m_), pot.end());
  }

  void pivot_on(std::size_t enter) {
    const std::size_t ei = enter / n_, ej = enter % n_;
    // Tree path from column node ej to row node ei.
    const auto adj = adjacency();
    std::vector<std::size_t> parent(m_ + n_, m_ + n_);
    std::queue<std::size_t> q;
    const std::size_t start = m_ + ej;
    parent[start] = start;
    q.push(start);
    while (!q.empty() && parent[ei] == m_ + n_) {
      const std::size_t a = q.front();
      q.pop();
      for (std::size_t b : adj[a]) {
        if (parent[b] != m_ + n_) continue;
        parent[b] = a;
        q.push(b);
      }
    }
    // Walk from ei back to start collecting cells; cells alternate with the
    // one touching ei being a donor (-).
    std::vector<std::size_t> cells;
    for (std::size_t node = ei; node != start; node = parent[node]) {
      const std::size_t other = parent[node];
      const std::size_t i = node < m_ ? node : other;
      const std::size_t j = (node < m_ ? other : node) - m_;
      cells.push_back(i * n_ + j);
    }
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cells.size(); k += 2) theta = std::min(theta, x_[cells[k]]);
    std::size_t leave = m_ * n_;
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      if (x_[cells[k]] == theta) leave = std::min(leave, cells[k]);
    }
    for (std::size_t k = 0; k < cells.size(); ++k) x_[cells[k]] += (k % 2 == 0 ? -theta : theta);
    x_[enter] = theta;
    basic_[enter] = 1;
    basic_[leave] = 0;
    x_[leave] = 0.0;
  }

  ExactPlan result() const {
    ExactPlan out;
    out.plan = RowMatrix::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
    for (std::size_t k = 0; k < m_ * n_; ++k) {
      const double q = std::max(0.0, x_[k]);
      out.plan(static_cast<Eigen::Index>(k / n_), static_cast<Eigen::Index>(k % n_)) = q;
      out.cost += q * c_(k / n_, k % n_);
    }
    out.u = Eigen::Map<const Eigen::VectorXd>(u_.data(), static_cast<Eigen::Index>(m_));
    out.v = Eigen::Map<const Eigen::VectorXd>(v_.data(), static_cast<Eigen::Index>(n_));
    return out;
  }

  const CostMatrix& c_;
  const std::size_t m_, n_;
  std::vector<double> x_;
  std::vector<char> basic_;
  std::vector<double> u_, v_;
};

}  // namespace

ExactPlan lp_exact_small(const CostMatrix& cost, std::span<const double> mu0, std::span<const double> mu1) {
  if (cost.rows() * cost.cols() > kLpExactMaxEntries) {
    throw ConfigError("lp_exact_small: " + std::to_string(cost.rows()) + " x " + std::to_string(cost.cols()) +
                      " exceeds the " + std::to_string(kLpExactMaxEntries) + "-entry limit");
  }
  if (mu0.size() != cost.rows() || mu1.size() != cost.cols()) throw DataError("lp_exact_small: marginal size mismatch");
  for (double w : mu0) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("lp_exact_small: invalid source weight");
  }
  for (double w : mu1) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DataError("lp_exact_small: invalid target weight");
  }
  const double s0 = std::accumulate(mu0.begin(), mu0.end(), 0.0);
  const double s1 = std::accumulate(mu1.begin(), mu1.end(), 0.0);
  if (std::abs(s0 - s1) > 1e-9 * std::max(1.0, std::max(s0, s1))) {
    throw DataError("lp_exact_small: marginals have different total mass");
  }
  return TransportationSimplex(cost, mu0, mu1).solve();
}

}  // namespace otcd

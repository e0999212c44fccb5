// SPDX-License-Identifier: Apache-2.0

#include "semd/exact_ot.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace semd {
namespace {

struct Cell {
  Index row;
  Index col;
  double flow;
};

// Basis cells always form a spanning tree of the bipartite row/column graph
// (m + n - 1 cells). Vertices are rows [0, m) and columns [m, m + n).
class Basis {
 public:
  Basis(Index m, Index n) : m_(m), n_(n) { cells_.reserve(m + n - 1); }

  void add(Index row, Index col, double flow) { cells_.push_back({row, col, flow}); }

  void remove(std::size_t idx) {
    cells_[idx] = cells_.back();
    cells_.pop_back();
  }

  std::vector<Cell>& cells() { return cells_; }
  const std::vector<Cell>& cells() const { return cells_; }

  // Dual variables from u[0] = 0 and u_i + w_j = M_ij on basic cells; the
  // tree structure makes the propagation terminate with every dual set.
  void solve_duals(const CostMatrix& m, Vector& u, Vector& w) const {
    u.setConstant(m_, std::numeric_limits<double>::quiet_NaN());
    w.setConstant(n_, std::numeric_limits<double>::quiet_NaN());
    u(0) = 0.0;
    bool progress = true;
    Index assigned = 1;
    while (progress && assigned < m_ + n_) {
      progress = false;
      for (const Cell& cell : cells_) {
        const bool u_known = !std::isnan(u(cell.row));
        const bool w_known = !std::isnan(w(cell.col));
        if (u_known && !w_known) {
          w(cell.col) = m(cell.row, cell.col) - u(cell.row);
          ++assigned;
          progress = true;
        } else if (w_known && !u_known) {
          u(cell.row) = m(cell.row, cell.col) - w(cell.col);
          ++assigned;
          progress = true;
        }
      }
    }
    if (assigned != m_ + n_)
      throw std::runtime_error("exact_ot: basis lost spanning-tree structure");
  }

  // Unique cycle closed by the entering cell: a path of basic cells from the
  // entering row to the entering column, found by DFS over the tree.
  std::vector<std::size_t> cycle_path(Index enter_row, Index enter_col) const {
    std::vector<std::vector<std::pair<Index, std::size_t>>> adj(m_ + n_);
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      adj[cells_[k].row].push_back({m_ + cells_[k].col, k});
      adj[m_ + cells_[k].col].push_back({cells_[k].row, k});
    }
    std::vector<std::size_t> path;
    std::vector<bool> visited(m_ + n_, false);
    if (!dfs(adj, visited, enter_row, m_ + enter_col, path))
      throw std::runtime_error("exact_ot: no pivot cycle found");
    return path;
  }

 private:
  bool dfs(const std::vector<std::vector<std::pair<Index, std::size_t>>>& adj,
           std::vector<bool>& visited, Index vertex, Index target,
           std::vector<std::size_t>& path) const {
    if (vertex == target) return true;
    visited[vertex] = true;
    for (const auto& [next, cell_idx] : adj[vertex]) {
      if (visited[next]) continue;
      path.push_back(cell_idx);
      if (dfs(adj, visited, next, target, path)) return true;
      path.pop_back();
    }
    return false;
  }

  Index m_;
  Index n_;
  std::vector<Cell> cells_;
};

// Northwest-corner initial basic feasible solution. The right-or-down walk
// from (0,0) to (m-1,n-1) visits exactly m + n - 1 cells, so degenerate
// zero-flow cells are kept to preserve the tree.
Basis northwest_corner(const MarginalWeights& r, const MarginalWeights& c) {
  const Index m = r.size();
  const Index n = c.size();
  Vector supply = r.vector();
  Vector demand = c.vector();
  Basis basis(m, n);
  Index i = 0;
  Index j = 0;
  while (true) {
    const double flow = std::min(supply(i), demand(j));
    basis.add(i, j, flow);
    supply(i) -= flow;
    demand(j) -= flow;
    if (i == m - 1 && j == n - 1) break;
    if (i < m - 1 && (supply(i) == 0.0 || j == n - 1))
      ++i;
    else
      ++j;
  }
  return basis;
}

}  // namespace

ExactSolution exact_ot(const CostMatrix& m, const MarginalWeights& r, const MarginalWeights& c) {
  detail::require(m.rows() == r.size() && m.cols() == c.size(),
                  "exact_ot: marginal sizes must match the cost matrix");
  detail::require(m.rows() <= kExactOtMaxSize && m.cols() <= kExactOtMaxSize,
                  "exact_ot: problem size exceeds the 12x12 oracle cap");
  detail::require(m.allFinite(), "exact_ot: cost matrix must be finite");

  const Index rows = m.rows();
  const Index cols = m.cols();
  Basis basis = northwest_corner(r, c);

  // Entering threshold: a reduced cost must be meaningfully negative to
  // pivot, otherwise dual round-off keeps the simplex churning at ulp scale.
  const double tol = 1e-13 * (1.0 + m.cwiseAbs().maxCoeff());
  const int bland_after = 5000;  // anti-cycling fallback for degenerate ties
  const int max_pivots = 20000;

  Vector u(rows), w(cols);
  for (int pivot = 0;; ++pivot) {
    if (pivot >= max_pivots) throw std::runtime_error("exact_ot: pivot limit exceeded");
    basis.solve_duals(m, u, w);

    Matrix is_basic = Matrix::Zero(rows, cols);
    for (const Cell& cell : basis.cells()) is_basic(cell.row, cell.col) = 1.0;

    // Dantzig rule (most negative reduced cost); after many degenerate
    // pivots fall back to Bland's first-improving rule to rule out cycling.
    const bool bland = pivot >= bland_after;
    Index enter_row = -1, enter_col = -1;
    double best = -tol;
    for (Index i = 0; i < rows && !(bland && enter_row >= 0); ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (is_basic(i, j) != 0.0) continue;
        const double reduced = m(i, j) - u(i) - w(j);
        if (reduced < best) {
          best = reduced;
          enter_row = i;
          enter_col = j;
          if (bland) break;
        }
      }
    }
    if (enter_row < 0) break;  // optimal

    // Alternate +/- around the cycle; the entering cell takes '+'.
    const std::vector<std::size_t> path = basis.cycle_path(enter_row, enter_col);
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = 0;
    for (std::size_t k = 0; k < path.size(); k += 2) {  // '-' positions
      const double flow = basis.cells()[path[k]].flow;
      if (flow < theta) {
        theta = flow;
        leaving = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      Cell& cell = basis.cells()[path[k]];
      cell.flow += (k % 2 == 0) ? -theta : theta;
    }
    basis.cells()[leaving].flow = 0.0;  // exact, the min attains it
    basis.remove(leaving);
    basis.add(enter_row, enter_col, theta);
  }

  ExactSolution sol;
  sol.plan = Matrix::Zero(rows, cols);
  double cost = 0.0;
  for (const Cell& cell : basis.cells()) {
    sol.plan(cell.row, cell.col) += cell.flow;
    cost += cell.flow * m(cell.row, cell.col);
  }
  sol.cost = cost;
  return sol;
}

double permutation_ot_cost(const CostMatrix& m) {
  detail::require(m.rows() == m.cols(), "permutation_ot_cost: matrix must be square");
  detail::require(m.rows() >= 1 && m.rows() <= 8, "permutation_ot_cost: n must be in [1, 8]");
  const Index n = m.rows();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += m(i, perm[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

}  // namespace semd

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/ot/plan.hpp"

namespace mbrot::ot {

struct SimplexOptions {
  /// A non-basic cell enters only if its reduced cost is below -tolerance.
  double reduced_cost_tolerance = 1e-12;
  /// 0 selects a cap derived from the problem size.
  std::size_t max_pivots = 0;
};

namespace detail {

struct Cell {
  std::size_t row;
  std::size_t col;
};

/// Basic cells of a transportation tableau. The basis always holds
/// rows + cols - 1 cells forming a spanning tree of the bipartite
/// row/column graph; degenerate cells carry zero flow.
class TransportBasis {
 public:
  TransportBasis(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  std::vector<Cell> cells;
  std::vector<double> flow;

  /// Solves u_i + v_j = C_ij over the basic cells with u_0 = 0.
  void potentials(const CostMatrix& cost, std::vector<double>& u,
                  std::vector<double>& v) const {
    u.assign(rows_, 0.0);
    v.assign(cols_, 0.0);
    std::vector<char> row_done(rows_, 0), col_done(cols_, 0);
    row_done[0] = 1;
    std::size_t assigned = 1;
    const std::size_t nodes = rows_ + cols_;
    while (assigned < nodes) {
      bool progress = false;
      for (const auto& c : cells) {
        if (row_done[c.row] && !col_done[c.col]) {
          v[c.col] = cost(c.row, c.col) - u[c.row];
          col_done[c.col] = 1;
          ++assigned;
          progress = true;
        } else if (!row_done[c.row] && col_done[c.col]) {
          u[c.row] = cost(c.row, c.col) - v[c.col];
          row_done[c.row] = 1;
          ++assigned;
          progress = true;
        }
      }
      if (!progress)
        throw Error(ErrorKind::SolverNonconvergence,
                    "transportation basis is not a spanning tree");
    }
  }

  /// Indices into `cells` along the tree path from row node `row` to column
  /// node `col`, in path order starting at the row.
  std::vector<std::size_t> path(std::size_t row, std::size_t col) const {
    const std::size_t nodes = rows_ + cols_;
    std::vector<std::vector<std::size_t>> incident(nodes);
    for (std::size_t k = 0; k < cells.size(); ++k) {
      incident[cells[k].row].push_back(k);
      incident[rows_ + cells[k].col].push_back(k);
    }
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> via(nodes, none);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> queue{row};
    seen[row] = 1;
    for (std::size_t head = 0; head < queue.size(); ++head) {
      std::size_t node = queue[head];
      for (std::size_t k : incident[node]) {
        std::size_t other = node < rows_ ? rows_ + cells[k].col : cells[k].row;
        if (seen[other]) continue;
        seen[other] = 1;
        via[other] = k;
        queue.push_back(other);
      }
    }
    const std::size_t target = rows_ + col;
    if (!seen[target])
      throw Error(ErrorKind::SolverNonconvergence,
                  "transportation basis is disconnected");
    std::vector<std::size_t> out;
    for (std::size_t node = target; node != row;) {
      std::size_t k = via[node];
      out.push_back(k);
      node = node < rows_ ? rows_ + cells[k].col : cells[k].row;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
};

/// North-west-corner staircase: exactly rows + cols - 1 cells, including
/// zero-flow cells where a row and a column run out together.
inline TransportBasis staircase_basis(std::span<const double> p_h,
                                      std::span<const double> p_y) {
  const std::size_t m = p_h.size();
  const std::size_t n = p_y.size();
  TransportBasis basis(m, n);
  std::vector<double> supply(p_h.begin(), p_h.end());
  std::vector<double> demand(p_y.begin(), p_y.end());
  std::size_t i = 0, j = 0;
  while (true) {
    double x = std::min(supply[i], demand[j]);
    basis.cells.push_back({i, j});
    basis.flow.push_back(x);
    supply[i] -= x;
    demand[j] -= x;
    if (i + 1 == m && j + 1 == n) break;
    if (j + 1 == n || (i + 1 < m && supply[i] <= demand[j]))
      ++i;
    else
      ++j;
  }
  return basis;
}

}  // namespace detail

/// The north-west-corner feasible coupling. Useful as a starting basis and
/// as an upper bound on the optimal transport cost.
inline Matrix north_west_corner(std::span<const double> p_h,
                                std::span<const double> p_y) {
  Matrix plan(p_h.size(), p_y.size());
  auto basis = detail::staircase_basis(p_h, p_y);
  for (std::size_t k = 0; k < basis.cells.size(); ++k)
    plan(basis.cells[k].row, basis.cells[k].col) = basis.flow[k];
  return plan;
}

/// Exact Wasserstein distance by the transportation simplex.
///
/// Starts from the north-west-corner basis and pivots with Bland's rule:
/// the entering cell is the lowest-index cell (row-major) with negative
/// reduced cost, and among cells tied for leaving the lowest index leaves.
/// The returned potentials certify optimality: f_i + g_j <= C_ij everywhere,
/// with equality on every basic cell.
inline TransportPlan solve_wd(const CostMatrix& cost, std::span<const double> p_h,
                              std::span<const double> p_y,
                              const SimplexOptions& options = {}) {
  const std::size_t m = cost.rows();
  const std::size_t n = cost.cols();
  if (p_h.size() != m || p_y.size() != n)
    throw Error(ErrorKind::InvalidArgument, "weight lengths do not match cost matrix");
  validate_weights(p_h, "p_h");
  validate_weights(p_y, "p_y");

  TransportPlan plan;
  plan.kind = PlanKind::Exact;

  if (m == 1 && n == 1) {
    plan.coupling = Matrix(1, 1, 1.0);
    plan.transport_cost = plan.objective = cost(0, 0);
    plan.row_potential = {cost(0, 0)};
    plan.col_potential = {0.0};
    return plan;
  }

  auto basis = detail::staircase_basis(p_h, p_y);

  const std::size_t cap =
      options.max_pivots ? options.max_pivots : 1000 + 50 * (m * n) * (m * n);
  std::vector<double> u, v;
  std::vector<char> in_basis(m * n, 0);
  std::size_t pivots = 0;
  while (true) {
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (const auto& c : basis.cells) in_basis[c.row * n + c.col] = 1;
    basis.potentials(cost, u, v);

    std::size_t entering = m * n;
    for (std::size_t k = 0; k < m * n && entering == m * n; ++k) {
      if (in_basis[k]) continue;
      std::size_t i = k / n, j = k % n;
      if (cost(i, j) - u[i] - v[j] < -options.reduced_cost_tolerance) entering = k;
    }
    if (entering == m * n) break;
    if (++pivots > cap)
      throw Error(ErrorKind::SolverNonconvergence,
                  "transportation simplex exceeded its pivot limit");

    const std::size_t ei = entering / n, ej = entering % n;
    auto cycle = basis.path(ei, ej);
    // Cells on the path alternate -, +, -, ... starting next to the entering
    // cell; the leaving cell is the minus cell with the least flow, ties to
    // the lowest row-major index.
    std::size_t leaving = cycle.front();
    for (std::size_t p = 0; p < cycle.size(); p += 2) {
      std::size_t k = cycle[p];
      const auto& c = basis.cells[k];
      const auto& best = basis.cells[leaving];
      double x = basis.flow[k];
      double xb = basis.flow[leaving];
      if (x < xb || (x == xb && c.row * n + c.col < best.row * n + best.col))
        leaving = k;
    }
    const double theta = basis.flow[leaving];
    for (std::size_t p = 0; p < cycle.size(); ++p) {
      double& x = basis.flow[cycle[p]];
      x = p % 2 == 0 ? std::max(0.0, x - theta) : x + theta;
    }
    basis.cells[leaving] = {ei, ej};
    basis.flow[leaving] = theta;
  }

  plan.coupling = Matrix(m, n);
  for (std::size_t k = 0; k < basis.cells.size(); ++k)
    plan.coupling(basis.cells[k].row, basis.cells[k].col) = basis.flow[k];
  plan.transport_cost = plan.objective = transport_cost(plan.coupling, cost);
  plan.row_potential = std::move(u);
  plan.col_potential = std::move(v);
  plan.iterations = pivots;
  return plan;
}

}  // namespace mbrot::ot

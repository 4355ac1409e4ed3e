#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/ot/plan.hpp"

namespace mbrot::ot {

/// Minimum-cost assignment of every row of a rows x cols matrix
/// (rows <= cols) to a distinct column, by the Hungarian method with
/// potentials. Returns the column of each row.
inline std::vector<std::size_t> hungarian(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n > m)
    throw Error(ErrorKind::InvalidArgument, "hungarian needs rows <= cols");
  constexpr double inf = std::numeric_limits<double>::infinity();

  // 1-based; index 0 is the virtual column used to grow alternating paths.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = owner[j0];
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (owner[j] != 0) assignment[owner[j] - 1] = j - 1;
  return assignment;
}

/// Linear assignment between two weighted segment sets.
///
/// Minimizes sum_i p_h(i) * C(i, map(i)) over deterministic maps that are
/// injective when m <= n and surjective when m >= n. The surjective case is
/// reduced to an m x m assignment: n columns that must each receive one row,
/// plus m - n free slots in which a row pays its cheapest column.
inline TransportPlan solve_la(const CostMatrix& cost, std::span<const double> p_h,
                              std::span<const double> p_y) {
  const std::size_t m = cost.rows();
  const std::size_t n = cost.cols();
  if (p_h.size() != m || p_y.size() != n)
    throw Error(ErrorKind::InvalidArgument, "weight lengths do not match cost matrix");
  validate_weights(p_h, "p_h");
  validate_weights(p_y, "p_y");

  TransportPlan plan;
  plan.kind = PlanKind::Assignment;
  plan.coupling = Matrix(m, n);

  if (m == 1 && n == 1) {
    plan.mapping = {0};
  } else if (m <= n) {
    Matrix weighted(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) weighted(i, j) = p_h[i] * cost(i, j);
    plan.mapping = hungarian(weighted);
  } else {
    std::vector<std::size_t> cheapest(m, 0);
    Matrix extended(m, m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        extended(i, j) = p_h[i] * cost(i, j);
        if (cost(i, j) < cost(i, cheapest[i])) cheapest[i] = j;
      }
      for (std::size_t j = n; j < m; ++j)
        extended(i, j) = p_h[i] * cost(i, cheapest[i]);
    }
    auto slots = hungarian(extended);
    plan.mapping.resize(m);
    for (std::size_t i = 0; i < m; ++i)
      plan.mapping[i] = slots[i] < n ? slots[i] : cheapest[i];
  }

  for (std::size_t i = 0; i < m; ++i) {
    plan.coupling(i, plan.mapping[i]) += p_h[i];
    plan.transport_cost += p_h[i] * cost(i, plan.mapping[i]);
  }
  plan.objective = plan.transport_cost;
  return plan;
}

}  // namespace mbrot::ot

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "mbrot/document.hpp"
#include "mbrot/error.hpp"
#include "mbrot/ot/plan.hpp"

namespace mbrot::ot {

struct EntropicParams {
  double epsilon = 0.1;
  std::size_t max_iterations = 10000;
  /// Stop once the L1 violation of the row marginal drops below this.
  double tolerance = 1e-9;
  /// Anneal epsilon geometrically from 1 down to the target, warm-starting
  /// each stage from the previous potentials. Same fixed point, far fewer
  /// iterations when epsilon is small.
  bool epsilon_scaling = true;

  void validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
      throw Error(ErrorKind::InvalidArgument, "epsilon must be > 0");
    if (!(tolerance > 0.0))
      throw Error(ErrorKind::InvalidArgument, "tolerance must be > 0");
    if (max_iterations == 0)
      throw Error(ErrorKind::InvalidArgument, "max_iterations must be >= 1");
  }
};

namespace detail {

inline double log_sum_exp(std::span<const double> x) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : x) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double v : x) s += std::exp(v - hi);
  return hi + std::log(s);
}

}  // namespace detail

/// Entropy-regularized optimal transport,
///   min_gamma <gamma, C> + epsilon * KL(gamma || p_h x p_y),
/// solved with log-domain Sinkhorn updates on the dual potentials (f, g):
///   gamma_ij = p_h(i) p_y(j) exp((f_i + g_j - C_ij) / epsilon).
/// Zero-mass rows and columns are excluded and receive no mass. Running out
/// of iterations is reported through `converged`, not thrown.
inline TransportPlan solve_ewd(const CostMatrix& cost, std::span<const double> p_h,
                               std::span<const double> p_y,
                               const EntropicParams& params = {}) {
  params.validate();
  const std::size_t m = cost.rows();
  const std::size_t n = cost.cols();
  if (p_h.size() != m || p_y.size() != n)
    throw Error(ErrorKind::InvalidArgument, "weight lengths do not match cost matrix");
  validate_weights(p_h, "p_h");
  validate_weights(p_y, "p_y");

  TransportPlan plan;
  plan.kind = PlanKind::Entropic;

  if (m == 1 && n == 1) {
    plan.coupling = Matrix(1, 1, 1.0);
    plan.transport_cost = plan.objective = cost(0, 0);
    plan.row_potential = {0.0};
    plan.col_potential = {0.0};
    return plan;
  }

  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < m; ++i)
    if (p_h[i] > 0.0) rows.push_back(i);
  for (std::size_t j = 0; j < n; ++j)
    if (p_y[j] > 0.0) cols.push_back(j);
  const std::size_t mr = rows.size();
  const std::size_t nc = cols.size();

  std::vector<double> log_a(mr), log_b(nc);
  for (std::size_t r = 0; r < mr; ++r) log_a[r] = std::log(p_h[rows[r]]);
  for (std::size_t c = 0; c < nc; ++c) log_b[c] = std::log(p_y[cols[c]]);

  std::vector<double> f(mr, 0.0), g(nc, 0.0), scratch(std::max(mr, nc));

  auto update_f = [&](double eps) {
    for (std::size_t r = 0; r < mr; ++r) {
      for (std::size_t c = 0; c < nc; ++c)
        scratch[c] = log_b[c] + (g[c] - cost(rows[r], cols[c])) / eps;
      f[r] = -eps * detail::log_sum_exp({scratch.data(), nc});
    }
  };
  auto update_g = [&](double eps) {
    for (std::size_t c = 0; c < nc; ++c) {
      for (std::size_t r = 0; r < mr; ++r)
        scratch[r] = log_a[r] + (f[r] - cost(rows[r], cols[c])) / eps;
      g[c] = -eps * detail::log_sum_exp({scratch.data(), mr});
    }
  };
  // After a g-update the column marginals are exact; measure the rows.
  auto row_error = [&](double eps) {
    double err = 0.0;
    for (std::size_t r = 0; r < mr; ++r) {
      double mass = 0.0;
      for (std::size_t c = 0; c < nc; ++c)
        mass += std::exp(log_a[r] + log_b[c] +
                         (f[r] + g[c] - cost(rows[r], cols[c])) / eps);
      err += std::abs(mass - p_h[rows[r]]);
    }
    return err;
  };

  const double eps = params.epsilon;
  std::size_t iterations = 0;
  if (params.epsilon_scaling && eps < 1.0) {
    for (double stage = 1.0; stage > eps && iterations < params.max_iterations;
         stage *= 0.5) {
      for (int k = 0; k < 50 && iterations < params.max_iterations; ++k) {
        update_f(stage);
        update_g(stage);
        ++iterations;
        if (k % 5 == 4 && row_error(stage) < 1e-4) break;
      }
    }
  }

  double err = std::numeric_limits<double>::infinity();
  bool converged = false;
  while (iterations < params.max_iterations) {
    update_f(eps);
    update_g(eps);
    ++iterations;
    err = row_error(eps);
    if (err < params.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged && iterations == 0) err = row_error(eps);

  plan.coupling = Matrix(m, n);
  plan.row_potential.assign(m, 0.0);
  plan.col_potential.assign(n, 0.0);
  double kl = 0.0;
  for (std::size_t r = 0; r < mr; ++r) {
    plan.row_potential[rows[r]] = f[r];
    for (std::size_t c = 0; c < nc; ++c) {
      double log_ratio = (f[r] + g[c] - cost(rows[r], cols[c])) / eps;
      double mass = std::exp(log_a[r] + log_b[c] + log_ratio);
      plan.coupling(rows[r], cols[c]) = mass;
      // 0 * log 0 = 0: an underflowed entry contributes nothing.
      if (mass > 0.0) kl += mass * log_ratio;
    }
  }
  for (std::size_t c = 0; c < nc; ++c) plan.col_potential[cols[c]] = g[c];

  plan.transport_cost = transport_cost(plan.coupling, cost);
  plan.kl = std::max(0.0, kl);
  plan.objective = plan.transport_cost + eps * plan.kl;
  plan.converged = converged;
  plan.iterations = iterations;
  plan.marginal_error = err;
  return plan;
}

}  // namespace mbrot::ot

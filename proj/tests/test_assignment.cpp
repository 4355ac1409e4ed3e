#include "mbrot/ot/assignment.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"

using namespace mbrot;
using namespace mbrot::ot;

TEST(SolveLa, PerfectMatchingAtZeroCost) {
  auto c = CostMatrix::from_rows({{0, 1}, {1, 0}});
  std::vector<double> w = {0.5, 0.5};
  auto plan = solve_la(c, w, w);
  EXPECT_EQ(plan.kind, PlanKind::Assignment);
  EXPECT_EQ(plan.mapping, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(plan.objective, 0.0);
}

TEST(SolveLa, SingleRowPicksCheapestColumn) {
  auto c = CostMatrix::from_rows({{0.2, 0.9}});
  std::vector<double> p_h = {1.0}, p_y = {0.5, 0.5};
  auto plan = solve_la(c, p_h, p_y);
  EXPECT_EQ(plan.mapping, std::vector<std::size_t>{0});
  EXPECT_DOUBLE_EQ(plan.objective, 0.2);
  EXPECT_EQ(plan.coupling(0, 0), 1.0);
  EXPECT_EQ(plan.coupling(0, 1), 0.0);
}

TEST(SolveLa, OneByOneBypass) {
  auto c = CostMatrix::from_rows({{0.3}});
  std::vector<double> w = {1.0};
  auto plan = solve_la(c, w, w);
  EXPECT_DOUBLE_EQ(plan.objective, 0.3);
}

TEST(SolveLa, SquareMatchesPermutationEnumeration) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto grid = oracle::random_costs(3, 3, rng);
    auto p_h = oracle::random_simplex(3, rng);
    auto p_y = oracle::random_simplex(3, rng);
    std::vector<std::size_t> perm = {0, 1, 2};
    double best = 1e9;
    do {
      double s = 0;
      for (std::size_t i = 0; i < 3; ++i) s += p_h[i] * grid[i][perm[i]];
      best = std::min(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    auto plan = solve_la(CostMatrix::from_rows(grid), p_h, p_y);
    EXPECT_NEAR(plan.objective, best, 1e-12);
    std::set<std::size_t> used(plan.mapping.begin(), plan.mapping.end());
    EXPECT_EQ(used.size(), 3u);
  }
}

TEST(SolveLa, RectangularMatchesBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto grid = oracle::random_costs(m, n, rng);
    auto p_h = oracle::random_simplex(m, rng);
    auto p_y = oracle::random_simplex(n, rng);
    auto plan = solve_la(CostMatrix::from_rows(grid), p_h, p_y);
    EXPECT_NEAR(plan.objective, oracle::la_brute_force(grid, p_h), 1e-12)
        << m << "x" << n;

    // Constraint check on the returned map.
    std::vector<int> hits(n, 0);
    for (auto j : plan.mapping) ++hits[j];
    for (std::size_t j = 0; j < n; ++j) {
      if (m <= n) {
        EXPECT_LE(hits[j], 1);
      }
      if (m >= n) {
        EXPECT_GE(hits[j], 1);
      }
    }
    // Each row puts all of its mass on one column.
    for (std::size_t i = 0; i < m; ++i) {
      int nonzero = 0;
      for (std::size_t j = 0; j < n; ++j) nonzero += plan.coupling(i, j) > 0;
      EXPECT_LE(nonzero, 1);
      EXPECT_DOUBLE_EQ(plan.coupling(i, plan.mapping[i]), p_h[i]);
    }
    EXPECT_NEAR(plan.objective, transport_cost(plan.coupling, CostMatrix::from_rows(grid)),
                1e-12);
  }
}

TEST(SolveLa, ScalesLinearlyWithCost) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 5);
  std::uniform_real_distribution<double> alpha(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto grid = oracle::random_costs(m, n, rng);
    auto p_h = oracle::random_simplex(m, rng);
    auto p_y = oracle::random_simplex(n, rng);
    double a = alpha(rng);
    auto scaled = grid;
    for (auto& row : scaled)
      for (auto& x : row) x *= a;
    double base = solve_la(CostMatrix::from_rows(grid), p_h, p_y).objective;
    double s = solve_la(CostMatrix::from_rows(scaled), p_h, p_y).objective;
    EXPECT_NEAR(s, a * base, 1e-12);
  }
}

TEST(SolveLa, RejectsMismatchedWeights) {
  auto c = CostMatrix::from_rows({{0.1, 0.2}});
  std::vector<double> one = {1.0}, bad = {0.7, 0.7};
  EXPECT_THROW(solve_la(c, one, one), Error);
  EXPECT_THROW(solve_la(c, one, bad), Error);
}

TEST(CostMatrix, RejectsOutOfRange) {
  EXPECT_THROW(CostMatrix::from_rows({{1.5}}), Error);
  EXPECT_THROW(CostMatrix::from_rows({{-0.1}}), Error);
  EXPECT_THROW(CostMatrix::from_rows({{0.1, 0.2}, {0.3}}), Error);
  EXPECT_THROW(CostMatrix(Matrix(0, 3)), Error);
}

#include "mbrot/ot/transport_simplex.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "mbrot/ot/assignment.hpp"
#include "oracles.hpp"

using namespace mbrot;
using namespace mbrot::ot;

namespace {

void expect_marginals(const TransportPlan& plan, const std::vector<double>& p_h,
                      const std::vector<double>& p_y, double tol) {
  for (std::size_t i = 0; i < p_h.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < p_y.size(); ++j) {
      EXPECT_GE(plan.coupling(i, j), 0.0);
      s += plan.coupling(i, j);
    }
    EXPECT_NEAR(s, p_h[i], tol);
  }
  for (std::size_t j = 0; j < p_y.size(); ++j) {
    double s = 0;
    for (std::size_t i = 0; i < p_h.size(); ++i) s += plan.coupling(i, j);
    EXPECT_NEAR(s, p_y[j], tol);
  }
}

void expect_certificate(const TransportPlan& plan, const CostMatrix& c, double tol) {
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) {
      double slack = c(i, j) - plan.row_potential[i] - plan.col_potential[j];
      EXPECT_GE(slack, -tol);
      if (plan.coupling(i, j) > 0) {
        EXPECT_NEAR(slack, 0.0, tol);
      }
    }
}

}  // namespace

TEST(SolveWd, IdenticalDocumentsCostNothing) {
  auto c = CostMatrix::from_rows({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  std::vector<double> w = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  auto plan = solve_wd(c, w, w);
  EXPECT_EQ(plan.objective, 0.0);
  expect_marginals(plan, w, w, 1e-12);
}

TEST(SolveWd, ReorderUsesAntiDiagonal) {
  auto c = CostMatrix::from_rows({{1, 0}, {0, 1}});
  std::vector<double> w = {0.5, 0.5};
  auto plan = solve_wd(c, w, w);
  EXPECT_EQ(plan.objective, 0.0);
  EXPECT_EQ(plan.coupling(0, 1), 0.5);
  EXPECT_EQ(plan.coupling(1, 0), 0.5);
}

TEST(SolveWd, MergeSplitsMass) {
  std::vector<double> p_h = {1.0}, p_y = {0.5, 0.5};
  auto flat = solve_wd(CostMatrix::from_rows({{0.2, 0.2}}), p_h, p_y);
  EXPECT_NEAR(flat.objective, 0.2, 1e-15);
  EXPECT_EQ(flat.coupling(0, 0), 0.5);
  EXPECT_EQ(flat.coupling(0, 1), 0.5);
  EXPECT_NEAR(solve_la(CostMatrix::from_rows({{0.2, 0.2}}), p_h, p_y).objective, 0.2, 1e-15);

  auto skew = CostMatrix::from_rows({{0.1, 0.3}});
  EXPECT_NEAR(solve_wd(skew, p_h, p_y).objective, 0.2, 1e-15);
  EXPECT_NEAR(solve_la(skew, p_h, p_y).objective, 0.1, 1e-15);
  auto vertex = oracle::wd_vertex_enumeration({{0.1, 0.3}}, p_h, p_y);
  EXPECT_NEAR(vertex.cost, 0.2, 1e-15);
}

TEST(SolveWd, OneByOneBypass) {
  std::vector<double> w = {1.0};
  auto plan = solve_wd(CostMatrix::from_rows({{0.7}}), w, w);
  EXPECT_DOUBLE_EQ(plan.objective, 0.7);
  EXPECT_EQ(plan.coupling(0, 0), 1.0);
}

TEST(SolveWd, MatchesVertexEnumeration) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto grid = oracle::random_costs(m, n, rng);
    auto p_h = oracle::random_simplex(m, rng);
    auto p_y = oracle::random_simplex(n, rng);
    auto c = CostMatrix::from_rows(grid);
    auto plan = solve_wd(c, p_h, p_y);
    auto vertex = oracle::wd_vertex_enumeration(grid, p_h, p_y);
    EXPECT_NEAR(plan.objective, vertex.cost, 1e-9) << m << "x" << n;
    expect_marginals(plan, p_h, p_y, 1e-8);
    expect_certificate(plan, c, 1e-7);
    EXPECT_NEAR(plan.objective, transport_cost(plan.coupling, c), 1e-12);
  }
}

TEST(SolveWd, DegenerateMarginals) {
  // Uniform weights on square problems make the NW-corner basis degenerate.
  std::mt19937_64 rng(13);
  for (std::size_t n = 2; n <= 6; ++n) {
    std::vector<double> w(n, 1.0 / n);
    for (int trial = 0; trial < 40; ++trial) {
      auto grid = oracle::random_costs(n, n, rng);
      // Coarse costs create ties as well.
      for (auto& row : grid)
        for (auto& x : row) x = std::round(x * 4) / 4;
      auto c = CostMatrix::from_rows(grid);
      auto plan = solve_wd(c, w, w);
      expect_marginals(plan, w, w, 1e-8);
      expect_certificate(plan, c, 1e-7);
      if (n <= 4) {
        EXPECT_NEAR(plan.objective, oracle::wd_vertex_enumeration(grid, w, w).cost, 1e-9);
      }
    }
  }
}

TEST(SolveWd, ZeroMassEntries) {
  std::vector<double> p_h = {0.0, 1.0}, p_y = {0.5, 0.0, 0.5};
  auto grid = oracle::Grid{{0.0, 0.0, 0.0}, {0.4, 0.1, 0.9}};
  auto plan = solve_wd(CostMatrix::from_rows(grid), p_h, p_y);
  EXPECT_NEAR(plan.objective, 0.65, 1e-15);
  expect_marginals(plan, p_h, p_y, 1e-12);
}

TEST(SolveWd, SymmetricUnderTranspose) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto c = CostMatrix::from_rows(oracle::random_costs(m, n, rng));
    auto p_h = oracle::random_simplex(m, rng);
    auto p_y = oracle::random_simplex(n, rng);
    EXPECT_NEAR(solve_wd(c, p_h, p_y).objective,
                solve_wd(c.transposed(), p_y, p_h).objective, 1e-9);
  }
}

TEST(SolveWd, ScalingAndNorthWestBound) {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<std::size_t> dim(1, 6);
  std::uniform_real_distribution<double> alpha(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = dim(rng), n = dim(rng);
    auto grid = oracle::random_costs(m, n, rng);
    auto p_h = oracle::random_simplex(m, rng);
    auto p_y = oracle::random_simplex(n, rng);
    auto c = CostMatrix::from_rows(grid);
    double a = alpha(rng);
    auto scaled = grid;
    for (auto& row : scaled)
      for (auto& x : row) x *= a;
    double base = solve_wd(c, p_h, p_y).objective;
    EXPECT_NEAR(solve_wd(CostMatrix::from_rows(scaled), p_h, p_y).objective, a * base, 1e-12);
    EXPECT_LE(base, transport_cost(north_west_corner(p_h, p_y), c) + 1e-12);
  }
}

TEST(SolveWd, WeightsValidated) {
  auto c = CostMatrix::from_rows({{0.1, 0.2}});
  std::vector<double> one = {1.0}, two = {0.5, 0.6};
  EXPECT_THROW(solve_wd(c, one, two), Error);
  EXPECT_THROW(solve_wd(c, two, two), Error);
}

TEST(NorthWestCorner, IsFeasible) {
  std::vector<double> p_h = {0.2, 0.3, 0.5}, p_y = {0.5, 0.5};
  auto plan = north_west_corner(p_h, p_y);
  EXPECT_NEAR(plan(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(plan(1, 0), 0.3, 1e-15);
  EXPECT_NEAR(plan(2, 1), 0.5, 1e-15);
}

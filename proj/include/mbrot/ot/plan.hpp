#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mbrot/error.hpp"

namespace mbrot::ot {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < m.rows_; ++i) {
      if (rows[i].size() != m.cols_)
        throw Error(ErrorKind::InvalidArgument, "ragged matrix rows");
      for (std::size_t j = 0; j < m.cols_; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Segment-pair costs. Every entry is finite and lies in [0, 1].
class CostMatrix {
 public:
  explicit CostMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() == 0 || values_.cols() == 0)
      throw Error(ErrorKind::InvalidArgument, "cost matrix must be at least 1x1");
    for (std::size_t i = 0; i < values_.rows(); ++i)
      for (std::size_t j = 0; j < values_.cols(); ++j) {
        double c = values_(i, j);
        if (!std::isfinite(c) || c < 0.0 || c > 1.0)
          throw Error(ErrorKind::InvalidArgument,
                      "cost entry outside [0, 1] at (" + std::to_string(i) +
                          ", " + std::to_string(j) + ")");
      }
  }

  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    return CostMatrix(Matrix::from_rows(rows));
  }

  std::size_t rows() const noexcept { return values_.rows(); }
  std::size_t cols() const noexcept { return values_.cols(); }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }
  const Matrix& values() const noexcept { return values_; }

  CostMatrix transposed() const { return CostMatrix(values_.transposed()); }

 private:
  Matrix values_;
};

enum class PlanKind { Assignment, Exact, Entropic };

inline std::string_view to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::Assignment: return "assignment";
    case PlanKind::Exact: return "exact";
    case PlanKind::Entropic: return "entropic";
  }
  return "unknown";
}

/// A coupling together with its cost.
///
/// `transport_cost` is sum_ij coupling(i,j) * C(i,j). For entropic plans
/// `kl` holds KL(coupling || p_h x p_y) and `objective` is
/// transport_cost + epsilon * kl; otherwise `objective == transport_cost`.
struct TransportPlan {
  PlanKind kind = PlanKind::Exact;
  Matrix coupling;
  double transport_cost = 0.0;
  double kl = 0.0;
  double objective = 0.0;

  /// Assignment plans: column chosen for each row.
  std::vector<std::size_t> mapping;

  /// Exact plans: dual potentials with f_i + g_j <= C_ij, tight on the
  /// support. Entropic plans: the Sinkhorn potentials.
  std::vector<double> row_potential;
  std::vector<double> col_potential;

  bool converged = true;
  std::size_t iterations = 0;
  /// Entropic plans: L1 marginal violation at termination.
  double marginal_error = 0.0;
};

inline double transport_cost(const Matrix& coupling, const CostMatrix& cost) {
  double total = 0.0;
  for (std::size_t i = 0; i < cost.rows(); ++i)
    for (std::size_t j = 0; j < cost.cols(); ++j)
      total += coupling(i, j) * cost(i, j);
  return total;
}

}  // namespace mbrot::ot

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace comboplat {

// Dense row-major matrix. Dimensions in this code base stay small (2K+1 arms),
// so no blocking or expression templates.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const;
  Matrix operator*(const Matrix& rhs) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double max_abs_diff(const Matrix& a, const Matrix& b);

struct CholeskyFactor {
  Matrix lower;
  double jitter = 0.0;  // amount added to every diagonal entry before factoring
};

// Lower-triangular L with L L^T = matrix + jitter I. Jitter is escalated from 0
// up to `jitter_tol` only when the plain factorization fails.
// Throws DomainError for non-square or asymmetric (> 1e-10) input and
// NotPositiveDefinite when even `jitter_tol` does not help.
CholeskyFactor cholesky(const Matrix& matrix, double jitter_tol = 1e-8);

// Symmetric, unit-diagonal, entries in [-1, 1], positive semi-definite up to
// 1e-8 diagonal jitter. Validated eagerly on construction.
class CorrelationMatrix {
 public:
  CorrelationMatrix() = default;
  explicit CorrelationMatrix(Matrix entries);

  static CorrelationMatrix identity(std::size_t dim) { return CorrelationMatrix(Matrix::identity(dim)); }
  static CorrelationMatrix bivariate(double rho);

  std::size_t dim() const noexcept { return entries_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Matrix& matrix() const noexcept { return entries_; }
  const CholeskyFactor& factor() const noexcept { return factor_; }

 private:
  Matrix entries_;
  CholeskyFactor factor_;
};

}  // namespace comboplat

#include "comboplat/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "comboplat/errors.hpp"

namespace comboplat {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DomainError("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::operator*(const Matrix& rhs) const {
  if (cols_ != rhs.rows_) throw DomainError("Matrix: dimension mismatch in product");
  Matrix out(rows_, rhs.cols_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
    }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) worst = std::max(worst, std::fabs(da[i] - db[i]));
  return worst;
}

namespace {

// Plain Cholesky; returns false on a non-positive pivot.
bool try_factor(const Matrix& a, double jitter, Matrix& lower) {
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(a(i, i)));
  const double pivot_floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() *
                             std::max(max_diag, 1e-300);
  lower = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = a(j, j) + jitter;
    for (std::size_t k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > pivot_floor)) return false;
    const double ljj = std::sqrt(pivot);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / ljj;
    }
  }
  return true;
}

}  // namespace

CholeskyFactor cholesky(const Matrix& matrix, double jitter_tol) {
  if (!matrix.square()) throw DomainError("cholesky: matrix must be square");
  const std::size_t n = matrix.rows();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::fabs(matrix(i, j) - matrix(j, i)) > 1e-10)
        throw DomainError("cholesky: matrix is not symmetric");

  CholeskyFactor out;
  if (try_factor(matrix, 0.0, out.lower)) return out;

  // Escalate jitter by decades; the final attempt uses jitter_tol itself.
  if (jitter_tol > 0.0) {
    double jitter = std::max(jitter_tol * 1e-6, 1e-15);
    while (true) {
      const double used = std::min(jitter, jitter_tol);
      if (try_factor(matrix, used, out.lower)) {
        out.jitter = used;
        return out;
      }
      if (used >= jitter_tol) break;
      jitter *= 10.0;
    }
  }
  std::ostringstream msg;
  msg << "cholesky: matrix is not positive definite (jitter up to " << jitter_tol << " tried)";
  throw NotPositiveDefinite(msg.str());
}

CorrelationMatrix::CorrelationMatrix(Matrix entries) : entries_(std::move(entries)) {
  if (!entries_.square() || entries_.rows() == 0)
    throw DomainError("CorrelationMatrix: must be a non-empty square matrix");
  const std::size_t n = entries_.rows();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(entries_(i, i) - 1.0) > 1e-12)
      throw DomainError("CorrelationMatrix: diagonal entries must equal 1");
    entries_(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = entries_(i, j);
      if (!std::isfinite(v) || v < -1.0 - 1e-12 || v > 1.0 + 1e-12) {
        std::ostringstream msg;
        msg << "CorrelationMatrix: entry (" << i << "," << j << ") = " << v << " outside [-1, 1]";
        throw DomainError(msg.str());
      }
      entries_(i, j) = std::clamp(v, -1.0, 1.0);
    }
  }
  factor_ = cholesky(entries_, 1e-8);
}

CorrelationMatrix CorrelationMatrix::bivariate(double rho) {
  return CorrelationMatrix(Matrix{{1.0, rho}, {rho, 1.0}});
}

}  // namespace comboplat

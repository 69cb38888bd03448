#include "comboplat/random.hpp"

#include <algorithm>
#include <cmath>

#include "comboplat/errors.hpp"
#include "comboplat/normal.hpp"

namespace comboplat {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull));
}

double NormalStream::normal() { return std_normal_quantile(uniform()); }

void fill_normal_chunk(std::uint64_t seed, std::size_t chunk, std::size_t rows, std::size_t dim, double* out) {
  NormalStream stream(seed, chunk);
  for (std::size_t i = 0; i < rows * dim; ++i) out[i] = stream.normal();
}

Matrix standard_normal_matrix(std::size_t count, std::size_t dim, std::uint64_t seed) {
  Matrix out(count, dim);
  if (count == 0 || dim == 0) return out;
  parallel_for(chunk_count(count), [&](std::size_t c) {
    const std::size_t begin = c * kRowsPerStream;
    const std::size_t rows = std::min(count, begin + kRowsPerStream) - begin;
    fill_normal_chunk(seed, c, rows, dim, out.row(begin).data());
  });
  return out;
}

Matrix transform_normals(const Matrix& standard, const Matrix& lower, const std::vector<double>& mean) {
  const std::size_t dim = mean.size();
  Matrix out(standard.rows(), dim);
  for (std::size_t r = 0; r < standard.rows(); ++r) {
    auto z = standard.row(r);
    auto y = out.row(r);
    for (std::size_t i = 0; i < dim; ++i) {
      double s = mean[i];
      for (std::size_t k = 0; k <= i; ++k) s += lower(i, k) * z[k];
      y[i] = s;
    }
  }
  return out;
}

MvnSampler::MvnSampler(std::vector<double> mean, Matrix covariance, std::uint64_t seed)
    : mean_(std::move(mean)), covariance_(std::move(covariance)), seed_(seed) {
  if (!covariance_.square() || covariance_.rows() != mean_.size())
    throw DomainError("MvnSampler: covariance must be dim x dim with dim = mean.size()");
  double max_diag = 0.0;
  for (std::size_t i = 0; i < mean_.size(); ++i) max_diag = std::max(max_diag, covariance_(i, i));
  factor_ = cholesky(covariance_, 1e-8 * std::max(max_diag, 1e-300));
}

Matrix MvnSampler::sample(std::size_t count) const {
  return transform_normals(standard_normal_matrix(count, dim(), seed_), factor_.lower, mean_);
}

}  // namespace comboplat

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "comboplat/linalg.hpp"

namespace comboplat {

// Mixes (seed, stream) into an engine seed with splitmix64 so that distinct
// stream ids give statistically independent mt19937_64 streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Seedable stream of uniforms and standard normals. mt19937_64 output is fixed
// by the standard; normals use inversion rather than std::normal_distribution
// so the values do not depend on the standard library implementation.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  // Uniform on the open interval (0, 1) with 53 random bits.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Rows generated per independent stream when drawing large matrices. Part of the
// reproducibility contract: changing it changes every simulated number.
inline constexpr std::size_t kRowsPerStream = 8192;

// count x dim matrix of iid N(0,1); chunk c of kRowsPerStream rows uses stream
// (seed, c), so the result does not depend on how many threads are used.
Matrix standard_normal_matrix(std::size_t count, std::size_t dim, std::uint64_t seed);

// Fills `rows` x `dim` normals of chunk `chunk` into out (row-major). Row r of
// the chunk equals row chunk * kRowsPerStream + r of standard_normal_matrix, so
// large simulations can stream chunks without materializing the whole matrix.
void fill_normal_chunk(std::uint64_t seed, std::size_t chunk, std::size_t rows, std::size_t dim, double* out);

inline std::size_t chunk_count(std::size_t count) { return (count + kRowsPerStream - 1) / kRowsPerStream; }

// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Callers
// write results into pre-sized slots so the outcome is order independent.
template <typename Body>
void parallel_for(std::size_t n, Body&& body);

class MvnSampler {
 public:
  // Covariance must be symmetric PSD; up to 1e-8 * max diagonal jitter is
  // tolerated. Throws NotPositiveDefinite otherwise.
  MvnSampler(std::vector<double> mean, Matrix covariance, std::uint64_t seed);

  std::size_t dim() const noexcept { return mean_.size(); }
  const std::vector<double>& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  const CholeskyFactor& factor() const noexcept { return factor_; }
  std::uint64_t seed() const noexcept { return seed_; }

  // The first `count` draws of this sampler's stream (count x dim).
  Matrix sample(std::size_t count) const;

 private:
  std::vector<double> mean_;
  Matrix covariance_;
  CholeskyFactor factor_;
  std::uint64_t seed_;
};

inline Matrix mvn_sample(const MvnSampler& sampler, std::size_t count) { return sampler.sample(count); }

// Applies `draws * L^T + mean` row by row.
Matrix transform_normals(const Matrix& standard, const Matrix& lower, const std::vector<double>& mean);

}  // namespace comboplat

#include "comboplat/detail/parallel.hpp"

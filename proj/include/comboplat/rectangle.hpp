#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "comboplat/linalg.hpp"

namespace comboplat {

// P(X > h, Y > k) for a standard bivariate normal with correlation rho.
// Infinite limits are allowed.
double bvn_upper(double h, double k, double rho);

// P(lower <= (X, Y) <= upper) for standard margins with correlation rho.
// Deterministic Gauss-Legendre scheme, absolute error well below 1e-8.
double bvn_rectangle(std::array<double, 2> lower, std::array<double, 2> upper, double rho);

struct RectangleSpec {
  std::vector<double> lower;  // -infinity allowed
  std::vector<double> upper;  // +infinity allowed
  CorrelationMatrix correlation;

  void validate() const;
};

struct RectangleEstimate {
  double probability = 0.0;
  double std_error = 0.0;
  std::size_t evaluations = 0;     // integrand evaluations spent
  std::size_t points_per_shift = 0;
};

struct MvnOptions {
  std::size_t shifts = 12;
  std::size_t initial_points = 500;
  std::size_t max_evaluations = 50'000'000;
};

// Randomized lattice-rule estimate of the rectangle probability using the
// separation-of-variables transform with variable prioritization. Points per
// shift double until the standard error drops to `precision`; throws
// PrecisionUnreachable once max_evaluations would be exceeded.
RectangleEstimate mvn_rectangle(const RectangleSpec& spec, double precision = 1e-4,
                                std::uint64_t seed = 0, const MvnOptions& options = {});

// Same estimator with a fixed lattice size. For a given seed the point set is
// fixed, so the estimate is a continuous function of the limits.
RectangleEstimate mvn_rectangle_fixed(const RectangleSpec& spec, std::size_t points_per_shift,
                                      std::uint64_t seed, std::size_t shifts = 12);

}  // namespace comboplat

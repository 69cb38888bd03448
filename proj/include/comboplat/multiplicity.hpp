#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "comboplat/correlation.hpp"
#include "comboplat/linalg.hpp"

namespace comboplat {

enum class MetricKind { FWER, FMER, MSFP, mFWER };

// Whether a false rejection is |Z| > c (two-sided) or Z > c (upper tail).
enum class Sidedness { TwoSided, Upper };

struct ErrorMetric {
  MetricKind kind = MetricKind::FWER;
  std::size_t m = 1;  // rejections tolerated minus one; only read for mFWER
  double alpha = 0.05;
  Sidedness sidedness = Sidedness::TwoSided;

  static ErrorMetric fwer(double alpha) { return {MetricKind::FWER, 1, alpha, Sidedness::TwoSided}; }
  static ErrorMetric fmer(double alpha) { return {MetricKind::FMER, 2, alpha, Sidedness::TwoSided}; }
  static ErrorMetric msfp(double alpha) { return {MetricKind::MSFP, 2, alpha, Sidedness::Upper}; }
  static ErrorMetric mfwer(std::size_t m, double alpha, Sidedness side = Sidedness::TwoSided) {
    return {MetricKind::mFWER, m, alpha, side};
  }

  // Number of false rejections that counts as an error, and their sidedness.
  std::size_t min_rejections() const;
  Sidedness tail() const;

  void validate() const;
  std::string name() const;
};

struct ThresholdResult {
  double critical_value = 0.0;
  double p_threshold = 0.0;  // 2[1 - Phi(c*)]
  ErrorMetric metric;
  CorrelationMatrix z_correlation;
  double achieved_level = 0.0;      // defining probability re-evaluated at c*
  double achieved_std_error = 0.0;  // 0 for deterministic evaluations
};

double bonferroni_threshold(std::size_t num_tests, double alpha);

// Holm step-down; decisions come back in input order.
std::vector<bool> holm_reject(std::span<const double> p_values, double alpha);

// Exact probability of the metric's error event for two statistics with
// correlation rho, all nulls true, critical value c.
double null_error_probability(double c, double rho, const ErrorMetric& metric);

// Bisection for c in [lo, hi] where a nonincreasing prob(c) crosses target.
// Throws RootBracketError when the bracket holds no crossing.
double solve_critical_value(const std::function<double(double)>& prob, double target, double lo = 0.0,
                            double hi = 10.0);

ThresholdResult classical_dunnett_threshold(const SingleStudyArms& arms, double alpha);

// Two statistics; metric kind FWER, FMER, MSFP, or mFWER with m <= 2.
ThresholdResult generalized_dunnett_threshold(double rho, const ErrorMetric& metric);

// Any number of statistics. FWER uses the lattice rectangle estimator; metrics
// counting >= 2 rejections use common-random-number simulation of the m-th
// largest statistic.
ThresholdResult platform_threshold(const CorrelationMatrix& z_corr, const ErrorMetric& metric,
                                   double precision = 1e-4, std::uint64_t seed = 0);

struct ErrorRates {
  double fwer = 0.0;
  double fmer = 0.0;
  double msfp = 0.0;
  std::size_t replications = 0;

  // Binomial standard error of a proportion estimated from `replications`.
  double std_error(double rate) const;
};

// Null simulation: FWER = any |Z| > c; FMER = at least two |Z| > c;
// MSFP = at least two Z > c.
ErrorRates empirical_error_rates(const CorrelationMatrix& z_corr, double critical_value, std::size_t replications,
                                 std::uint64_t seed);

// Same draws, separate thresholds per statistic (used for Holm/Bonferroni
// comparisons). `decide` maps one row of Z to reject flags.
ErrorRates empirical_error_rates_with(const CorrelationMatrix& z_corr, std::size_t replications, std::uint64_t seed,
                                      const std::function<void(std::span<const double>, std::vector<bool>&)>& decide);

}  // namespace comboplat

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "comboplat/design_types.hpp"
#include "comboplat/multiplicity.hpp"

namespace comboplat {

// P(|Z| > c) for Z ~ N(sqrt(W), 1).
double marginal_power_oracle(double W, double c);

// min over comparisons of marginal_power_oracle at total size N.
double min_marginal_power(const DesignScenario& scenario, const Allocation& alloc, double critical_value, double N);

struct PowerRequest {
  DesignScenario scenario;
  Allocation alloc;
  double critical_value = 1.959963984540054;
  double N = 0.0;
  std::size_t n_sim = 10'000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PowerDetail {
  double power = 0.0;                  // min per-comparison rejection rate
  std::vector<double> per_comparison;  // in Z order (Z_{1,1}, Z_{1,2}, ...)
  double reject_all = 0.0;
  double reject_any = 0.0;
  std::size_t n_sim = 0;
};

// Power at any N from one pool of standard normals: the simulated arm means
// at N are mean + L z / sqrt(N), so Z(N) = sqrt(N) a + e with a, e fixed.
class CrnPowerEvaluator {
 public:
  CrnPowerEvaluator(const DesignScenario& scenario, const Allocation& alloc, double critical_value, std::size_t n_sim,
                    std::uint64_t seed);

  PowerDetail evaluate(double N) const;
  double power(double N) const { return evaluate(N).power; }
  std::size_t comparisons() const noexcept { return a_.size(); }

 private:
  double critical_value_;
  std::size_t n_sim_;
  std::vector<double> a_;  // standardized mean difference at N = 1
  std::vector<double> e_;  // n_sim x comparisons noise terms
};

double mc_power(const PowerRequest& request);
PowerDetail mc_power_detail(const PowerRequest& request);

struct SearchStep {
  long N = 0;
  double power = 0.0;
};

struct SearchOutcome {
  long N_star = 0;
  double power = 0.0;
  std::vector<SearchStep> trace;
};

// Doubling from N0 until power(N) >= target, then bisection between the last
// failing and first passing size. When N0 already passes, the lower end is
// `floor` instead. Throws BudgetExceeded once N would pass `cap`.
SearchOutcome search_sample_size(const std::function<double(long)>& power, double target, long N0, long floor,
                                 long cap);

// Largest-remainder rounding of p_j N to integers with every arm >= 1.
std::vector<long> round_allocation(const Allocation& alloc, long N);

struct SampleSizeOptions {
  long N0 = 20;
  std::size_t n_sim = 10'000;
  std::uint64_t seed = 0;
  long max_N = 1'000'000;
};

struct SampleSizeResult {
  long N_star = 0;
  double search_power = 0.0;    // at N_star with real-valued arm sizes
  double achieved_power = 0.0;  // re-simulated at the rounded arm counts
  double N_star_stderr = 0.0;   // delta-method MC error of N_star
  std::vector<long> arm_counts;
  std::vector<SearchStep> search_trace;
  PowerDetail detail;  // at the rounded design
};

SampleSizeResult find_sample_size(const DesignScenario& scenario, const Allocation& alloc, double critical_value,
                                  double target_power, const SampleSizeOptions& options = {});

inline SampleSizeResult find_sample_size(const DesignScenario& scenario, const Allocation& alloc,
                                         const ThresholdResult& threshold, double target_power,
                                         const SampleSizeOptions& options = {}) {
  return find_sample_size(scenario, alloc, threshold.critical_value, target_power, options);
}

}  // namespace comboplat

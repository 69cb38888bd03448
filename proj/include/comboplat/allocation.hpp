#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "comboplat/design_types.hpp"

namespace comboplat {

// p_j = exp(theta_j) / sum exp(theta); theta in allocation order.
Allocation softmax_to_allocation(std::span<const double> theta);

struct Noncentrality {
  double W1 = 0.0;  // combination vs control
  double W2 = 0.0;  // monotherapy vs control
};

// Per-substudy Wald noncentralities at total size N. Throws DomainError when
// the combination-vs-control variance term is not positive.
std::vector<Noncentrality> wald_noncentrality(const DesignScenario& scenario, const Allocation& alloc, double N);

// Published analytic allocation for one substudy with uncorrelated
// combination and control endpoints. It balances W1 = W2 only at s = 1; for
// other s the numerical max-min optimum differs (see optimize_allocation).
Allocation closed_form_allocation(double s);

// min over substudies and comparisons of W at N = 1.
double maxmin_objective(const DesignScenario& scenario, const Allocation& alloc);

struct NelderMeadOptions {
  double initial_step = 0.5;
  double f_tol = 1e-10;  // relative to max(1, |f|)
  double x_tol = 1e-8;   // simplex diameter
  std::size_t max_evaluations = 100'000;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};

// Minimizes f from x0.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

struct AllocationOptions {
  std::size_t starts = 8;
  std::uint64_t seed = 20240917;
  std::size_t restarts = 6;
  // Return closed_form_allocation directly for K = 1, rho_AB_A = 0 instead of
  // searching. Off by default because the formula is not the max-min optimum
  // away from s = 1.
  bool use_closed_form = false;
  NelderMeadOptions simplex;
};

struct AllocationResult {
  Allocation allocation;
  double objective = 0.0;  // min W at N = 1
  bool closed_form = false;
  std::size_t converged_starts = 0;
  std::vector<double> start_objectives;  // best objective reached from each start
};

AllocationResult optimize_allocation_detailed(const DesignScenario& scenario, const AllocationOptions& options = {});

inline Allocation optimize_allocation(const DesignScenario& scenario, const AllocationOptions& options = {}) {
  return optimize_allocation_detailed(scenario, options).allocation;
}

}  // namespace comboplat

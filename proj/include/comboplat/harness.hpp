#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "comboplat/design_types.hpp"
#include "comboplat/result_table.hpp"

namespace comboplat {

// Error rates of two independent trials at the unadjusted 5% two-sided level.
inline constexpr double kBaselineFwer = 0.0975;
inline constexpr double kBaselineFmer = 0.0025;
inline constexpr double kBaselineMsfp = 0.000625;

struct NamedAllocation {
  std::string label;
  Allocation allocation;
};

struct GridSpec {
  // Swept parameter for the curve studies: rho_AB_B, rho_AB_A or rho_z (the
  // test-statistic correlation itself, allocation ignored).
  std::string sweep = "rho_AB_B";
  double from = 0.05;
  double to = 0.95;
  double step = 0.01;
  // Fixed values: rho_AB_A, rho_AB_B, rho_A_B for curves; delta, sigma2,
  // power for design surfaces.
  std::map<std::string, double> fixed;
  std::vector<NamedAllocation> allocations;
  std::size_t replications = 100'000;
  std::uint64_t seed = 1;

  // Design surface axes.
  std::vector<double> synergy_values;
  std::vector<double> rho_values;
  std::size_t n_sim = 10'000;
  long N0 = 20;

  void validate() const;
  std::vector<double> sweep_values() const;
  double fixed_or(const std::string& key, double fallback) const;
};

std::vector<NamedAllocation> default_allocations();
GridSpec default_curve_grid();
GridSpec default_design_surface_grid();

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

ResultTable run_error_curves(const GridSpec& grid);
ResultTable run_adjustment_comparison(const GridSpec& grid);
ResultTable run_threshold_curves(const GridSpec& grid);
ResultTable run_design_surface(const GridSpec& grid, const ProgressFn& progress = {});

// Isotonic checks with tolerance: a step against the direction fails only if
// it exceeds k times the pooled standard error of the two points.
bool is_nonincreasing(std::span<const double> values, std::span<const double> std_errors, double k = 3.0);
bool is_nondecreasing(std::span<const double> values, std::span<const double> std_errors, double k = 3.0);

}  // namespace comboplat

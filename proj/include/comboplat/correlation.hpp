#pragma once

#include <cstddef>
#include <vector>

#include "comboplat/design_types.hpp"
#include "comboplat/linalg.hpp"

namespace comboplat {

// One substudy: control A, monotherapy B, combination AB. Counts may be
// fractional (n_j = p_j N during design searches) but must be positive.
struct SingleStudyArms {
  double n_A = 1.0;
  double n_B = 1.0;
  double n_AB = 1.0;
  double rho_AB_A = 0.0;
  double rho_AB_B = 0.0;
  double rho_A_B = 0.0;  // endpoints of B and A taken as independent by default
  double sigma2 = 1.0;

  void validate() const;
};

struct PlatformArms {
  std::size_t K = 1;
  double n_A = 1.0;
  std::vector<double> n_B;   // per substudy
  std::vector<double> n_AB;  // per substudy
  ArmCorrelationTable correlations;  // indexed by arm_index(); unset pairs are 0
  double sigma2 = 1.0;

  void validate() const;
  double count(std::size_t arm) const;
  static PlatformArms from_single(const SingleStudyArms& arms);
};

// Correlation of (Y_i - Y_A) and (Y_j - Y_A) for arms i, j sharing control A.
// Throws DomainError when a difference has non-positive variance.
double comparison_correlation(double n_i, double n_j, double n_A, double rho_ij, double rho_iA, double rho_jA);

// Corr(Z1, Z2) with Z1 = AB vs A, Z2 = B vs A.
double test_stat_correlation(const SingleStudyArms& arms);

// Dunnett's rho* = 1 / sqrt((n_A/n_AB + 1)(n_B/n_AB + 1)).
double classical_dunnett_correlation(const SingleStudyArms& arms);

// 2K x 2K matrix over (Z_{1,1}, Z_{1,2}, ..., Z_{K,1}, Z_{K,2}), Z_{k,1} being
// combination k vs control and Z_{k,2} monotherapy k vs control.
CorrelationMatrix platform_z_correlation_matrix(const PlatformArms& arms);

// Arm of the statistic with index z in the ordering above.
inline std::size_t z_arm(std::size_t z) { return z % 2 == 0 ? arm_index(z / 2, ArmRole::Combo) : arm_index(z / 2, ArmRole::Mono); }

struct ArmMeanDistribution {
  std::vector<double> mean;  // (0, delta_1, s_1 delta_1, ...) in arm order
  Matrix covariance;         // sigma2 rho_ij / (sqrt(p_i p_j) N)
};

ArmMeanDistribution alternative_mean_covariance(const DesignScenario& scenario, const Allocation& alloc, double N);

// Z correlation implied by an allocation (independent of N).
CorrelationMatrix design_z_correlation(const DesignScenario& scenario, const Allocation& alloc);

}  // namespace comboplat

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace comboplat {

// Arms are indexed A = 0, B_k = 1 + 2k, AB_k = 2 + 2k (k zero-based), which is
// also the order of allocation ratios and of simulated arm means.
enum class ArmRole { Mono, Combo };

inline std::size_t control_arm() { return 0; }
inline std::size_t arm_index(std::size_t substudy, ArmRole role) {
  return role == ArmRole::Mono ? 1 + 2 * substudy : 2 + 2 * substudy;
}
inline std::size_t arm_count(std::size_t K) { return 2 * K + 1; }

// Sparse symmetric table of endpoint correlations between arms; pairs that
// were never set read as 0 (arms without a shared component).
class ArmCorrelationTable {
 public:
  void set(std::size_t arm_i, std::size_t arm_j, double rho);
  double get(std::size_t arm_i, std::size_t arm_j) const;
  const std::map<std::pair<std::size_t, std::size_t>, double>& entries() const noexcept { return entries_; }

 private:
  std::map<std::pair<std::size_t, std::size_t>, double> entries_;
};

struct DesignScenario {
  std::size_t K = 1;
  std::vector<double> delta;       // per-substudy effect size, > 0
  std::vector<double> synergy;     // s_k
  double sigma2 = 1.0;
  std::vector<double> rho_ABk_A;   // combination vs control
  std::vector<double> rho_ABk_Bk;  // combination vs its monotherapy
  ArmCorrelationTable cross;       // any further arm pairs (cross-substudy overlaps)

  static DesignScenario single(double delta, double synergy, double rho_AB_A = 0.0, double rho_AB_B = 0.0,
                               double sigma2 = 1.0);

  // allow_null admits delta = 0 (null calibration runs of the power code).
  void validate(bool allow_null = false) const;

  // Full arm table: `cross` plus the per-substudy entries above.
  ArmCorrelationTable arm_correlations() const;
};

struct Allocation {
  std::vector<double> ratios;  // (p_A, p_B1, p_AB1, ..., p_BK, p_ABK)
  std::optional<double> N;

  std::size_t K() const noexcept { return ratios.empty() ? 0 : (ratios.size() - 1) / 2; }
  double p_A() const { return ratios.at(0); }
  double p_B(std::size_t k = 0) const { return ratios.at(arm_index(k, ArmRole::Mono)); }
  double p_AB(std::size_t k = 0) const { return ratios.at(arm_index(k, ArmRole::Combo)); }

  // Throws DomainError unless ratios has odd length >= 3, entries in (0,1),
  // sum 1 within 1e-9.
  void validate() const;

  static Allocation equal(std::size_t K);
};

}  // namespace comboplat

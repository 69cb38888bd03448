#include "comboplat/design_types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "comboplat/errors.hpp"

namespace comboplat {

void ArmCorrelationTable::set(std::size_t arm_i, std::size_t arm_j, double rho) {
  if (arm_i == arm_j) throw DomainError("ArmCorrelationTable: an arm's correlation with itself is fixed at 1");
  if (!(rho >= -1.0 && rho <= 1.0)) {
    std::ostringstream msg;
    msg << "ArmCorrelationTable: correlation " << rho << " outside [-1, 1]";
    throw DomainError(msg.str());
  }
  entries_[{std::min(arm_i, arm_j), std::max(arm_i, arm_j)}] = rho;
}

double ArmCorrelationTable::get(std::size_t arm_i, std::size_t arm_j) const {
  if (arm_i == arm_j) return 1.0;
  auto it = entries_.find({std::min(arm_i, arm_j), std::max(arm_i, arm_j)});
  return it == entries_.end() ? 0.0 : it->second;
}

DesignScenario DesignScenario::single(double delta, double synergy, double rho_AB_A, double rho_AB_B, double sigma2) {
  DesignScenario s;
  s.K = 1;
  s.delta = {delta};
  s.synergy = {synergy};
  s.sigma2 = sigma2;
  s.rho_ABk_A = {rho_AB_A};
  s.rho_ABk_Bk = {rho_AB_B};
  return s;
}

void DesignScenario::validate(bool allow_null) const {
  if (K == 0) throw DomainError("DesignScenario: K must be at least 1");
  if (delta.size() != K || synergy.size() != K || rho_ABk_A.size() != K || rho_ABk_Bk.size() != K)
    throw DomainError("DesignScenario: delta, synergy and correlation vectors need one entry per substudy");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("DesignScenario: sigma2 must be positive");
  for (std::size_t k = 0; k < K; ++k) {
    const bool ok = allow_null ? delta[k] >= 0.0 : delta[k] > 0.0;
    if (!ok || !std::isfinite(delta[k])) throw DomainError("DesignScenario: delta must be positive");
    if (!std::isfinite(synergy[k])) throw DomainError("DesignScenario: synergy must be finite");
    for (double r : {rho_ABk_A[k], rho_ABk_Bk[k]})
      if (!(r >= -1.0 && r <= 1.0)) throw DomainError("DesignScenario: correlations must lie in [-1, 1]");
  }
  for (const auto& [key, rho] : cross.entries())
    if (key.second >= arm_count(K)) throw DomainError("DesignScenario: cross correlation refers to a missing arm");
}

ArmCorrelationTable DesignScenario::arm_correlations() const {
  ArmCorrelationTable t = cross;
  for (std::size_t k = 0; k < K; ++k) {
    t.set(arm_index(k, ArmRole::Combo), control_arm(), rho_ABk_A[k]);
    t.set(arm_index(k, ArmRole::Combo), arm_index(k, ArmRole::Mono), rho_ABk_Bk[k]);
  }
  return t;
}

void Allocation::validate() const {
  if (ratios.size() < 3 || ratios.size() % 2 == 0)
    throw DomainError("Allocation: need 2K+1 ratios (control, then monotherapy/combination per substudy)");
  double sum = 0.0;
  for (double p : ratios) {
    if (!(p > 0.0 && p < 1.0)) {
      std::ostringstream msg;
      msg << "Allocation: ratio " << p << " outside (0, 1)";
      throw DomainError(msg.str());
    }
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    std::ostringstream msg;
    msg << "Allocation: ratios sum to " << sum << ", expected 1";
    throw DomainError(msg.str());
  }
  if (N && !(*N >= 1.0)) throw DomainError("Allocation: N must be at least 1");
}

Allocation Allocation::equal(std::size_t K) {
  Allocation a;
  a.ratios.assign(arm_count(K), 1.0 / static_cast<double>(arm_count(K)));
  return a;
}

}  // namespace comboplat

#include "comboplat/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "comboplat/errors.hpp"

namespace comboplat {

namespace {

void check_count(double n, const char* name) {
  if (!(n > 0.0) || !std::isfinite(n)) {
    std::ostringstream msg;
    msg << "arm count " << name << " must be positive, got " << n;
    throw DomainError(msg.str());
  }
}

void check_rho(double r, const char* name) {
  if (!(r >= -1.0 && r <= 1.0)) {
    std::ostringstream msg;
    msg << "correlation " << name << " must lie in [-1, 1], got " << r;
    throw DomainError(msg.str());
  }
}

}  // namespace

void SingleStudyArms::validate() const {
  check_count(n_A, "n_A");
  check_count(n_B, "n_B");
  check_count(n_AB, "n_AB");
  check_rho(rho_AB_A, "rho_AB_A");
  check_rho(rho_AB_B, "rho_AB_B");
  check_rho(rho_A_B, "rho_A_B");
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
}

void PlatformArms::validate() const {
  if (K == 0) throw DomainError("PlatformArms: K must be at least 1");
  if (n_B.size() != K || n_AB.size() != K) throw DomainError("PlatformArms: need one n_B and n_AB per substudy");
  check_count(n_A, "n_A");
  for (std::size_t k = 0; k < K; ++k) {
    check_count(n_B[k], "n_B");
    check_count(n_AB[k], "n_AB");
  }
  for (const auto& [key, rho] : correlations.entries()) {
    if (key.second >= arm_count(K)) throw DomainError("PlatformArms: correlation refers to a missing arm");
    check_rho(rho, "table entry");
  }
  if (!(sigma2 > 0.0)) throw DomainError("sigma2 must be positive");
}

double PlatformArms::count(std::size_t arm) const {
  if (arm == control_arm()) return n_A;
  const std::size_t k = (arm - 1) / 2;
  return arm % 2 == 1 ? n_B.at(k) : n_AB.at(k);
}

PlatformArms PlatformArms::from_single(const SingleStudyArms& arms) {
  PlatformArms p;
  p.K = 1;
  p.n_A = arms.n_A;
  p.n_B = {arms.n_B};
  p.n_AB = {arms.n_AB};
  p.sigma2 = arms.sigma2;
  const std::size_t b = arm_index(0, ArmRole::Mono), ab = arm_index(0, ArmRole::Combo);
  p.correlations.set(ab, control_arm(), arms.rho_AB_A);
  p.correlations.set(ab, b, arms.rho_AB_B);
  p.correlations.set(b, control_arm(), arms.rho_A_B);
  return p;
}

double comparison_correlation(double n_i, double n_j, double n_A, double rho_ij, double rho_iA, double rho_jA) {
  const double num = rho_ij / std::sqrt(n_i * n_j) - rho_iA / std::sqrt(n_i * n_A) -
                     rho_jA / std::sqrt(n_j * n_A) + 1.0 / n_A;
  const double var_i = 1.0 / n_i + 1.0 / n_A - 2.0 * rho_iA / std::sqrt(n_i * n_A);
  const double var_j = 1.0 / n_j + 1.0 / n_A - 2.0 * rho_jA / std::sqrt(n_j * n_A);
  if (!(var_i > 0.0) || !(var_j > 0.0))
    throw DomainError("test statistic variance is not positive; arm correlations are inconsistent with the counts");
  return std::clamp(num / std::sqrt(var_i * var_j), -1.0, 1.0);
}

double test_stat_correlation(const SingleStudyArms& arms) {
  arms.validate();
  return comparison_correlation(arms.n_AB, arms.n_B, arms.n_A, arms.rho_AB_B, arms.rho_AB_A, arms.rho_A_B);
}

double classical_dunnett_correlation(const SingleStudyArms& arms) {
  arms.validate();
  return 1.0 / std::sqrt((arms.n_A / arms.n_AB + 1.0) * (arms.n_B / arms.n_AB + 1.0));
}

CorrelationMatrix platform_z_correlation_matrix(const PlatformArms& arms) {
  arms.validate();
  const std::size_t dim = 2 * arms.K;
  const std::size_t a = control_arm();
  Matrix m = Matrix::identity(dim);
  for (std::size_t zi = 0; zi < dim; ++zi)
    for (std::size_t zj = zi + 1; zj < dim; ++zj) {
      const std::size_t i = z_arm(zi), j = z_arm(zj);
      const double r = comparison_correlation(arms.count(i), arms.count(j), arms.count(a), arms.correlations.get(i, j),
                                              arms.correlations.get(i, a), arms.correlations.get(j, a));
      m(zi, zj) = r;
      m(zj, zi) = r;
    }
  return CorrelationMatrix(std::move(m));
}

ArmMeanDistribution alternative_mean_covariance(const DesignScenario& scenario, const Allocation& alloc, double N) {
  scenario.validate(true);
  alloc.validate();
  if (alloc.K() != scenario.K) throw DomainError("allocation has a different number of substudies than the scenario");
  if (!(N >= 1.0)) throw DomainError("total sample size N must be at least 1");
  const std::size_t n = arm_count(scenario.K);
  const ArmCorrelationTable table = scenario.arm_correlations();
  ArmMeanDistribution out;
  out.mean.assign(n, 0.0);
  for (std::size_t k = 0; k < scenario.K; ++k) {
    out.mean[arm_index(k, ArmRole::Mono)] = scenario.delta[k];
    out.mean[arm_index(k, ArmRole::Combo)] = scenario.synergy[k] * scenario.delta[k];
  }
  out.covariance = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      out.covariance(i, j) =
          table.get(i, j) * scenario.sigma2 / (std::sqrt(alloc.ratios[i] * alloc.ratios[j]) * N);
  return out;
}

CorrelationMatrix design_z_correlation(const DesignScenario& scenario, const Allocation& alloc) {
  scenario.validate(true);
  alloc.validate();
  if (alloc.K() != scenario.K) throw DomainError("allocation has a different number of substudies than the scenario");
  PlatformArms arms;
  arms.K = scenario.K;
  arms.n_A = alloc.p_A();
  for (std::size_t k = 0; k < scenario.K; ++k) {
    arms.n_B.push_back(alloc.p_B(k));
    arms.n_AB.push_back(alloc.p_AB(k));
  }
  arms.correlations = scenario.arm_correlations();
  arms.sigma2 = scenario.sigma2;
  return platform_z_correlation_matrix(arms);
}

}  // namespace comboplat

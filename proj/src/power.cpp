#include "comboplat/power.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "comboplat/allocation.hpp"
#include "comboplat/correlation.hpp"
#include "comboplat/errors.hpp"
#include "comboplat/normal.hpp"
#include "comboplat/random.hpp"

namespace comboplat {

double marginal_power_oracle(double W, double c) {
  if (!(W >= 0.0)) throw DomainError("marginal_power_oracle: W must be non-negative");
  const double mu = std::sqrt(W);
  return std_normal_sf(c - mu) + std_normal_cdf(-c - mu);
}

double min_marginal_power(const DesignScenario& scenario, const Allocation& alloc, double critical_value, double N) {
  double best = 1.0;
  for (const auto& w : wald_noncentrality(scenario, alloc, N))
    best = std::min({best, marginal_power_oracle(w.W1, critical_value), marginal_power_oracle(w.W2, critical_value)});
  return best;
}

void PowerRequest::validate() const {
  scenario.validate(true);
  alloc.validate();
  if (alloc.K() != scenario.K) throw DomainError("PowerRequest: allocation and scenario disagree on K");
  if (!(critical_value > 0.0) || !std::isfinite(critical_value))
    throw DomainError("PowerRequest: critical value must be positive");
  if (n_sim < 1000) throw DomainError("PowerRequest: n_sim must be at least 1000");
  if (!(N >= static_cast<double>(arm_count(scenario.K))))
    throw DomainError("PowerRequest: N must allow at least one subject per arm");
}

CrnPowerEvaluator::CrnPowerEvaluator(const DesignScenario& scenario, const Allocation& alloc, double critical_value,
                                     std::size_t n_sim, std::uint64_t seed)
    : critical_value_(critical_value), n_sim_(n_sim) {
  if (n_sim == 0) throw DomainError("power evaluation needs at least one replication");
  const ArmMeanDistribution dist = alternative_mean_covariance(scenario, alloc, 1.0);
  const std::size_t arms = dist.mean.size();
  const std::size_t comps = 2 * scenario.K;
  double max_diag = 0.0;
  for (std::size_t i = 0; i < arms; ++i) max_diag = std::max(max_diag, dist.covariance(i, i));
  const CholeskyFactor f = cholesky(dist.covariance, 1e-8 * max_diag);
  const Matrix& l = f.lower;

  std::vector<double> sd(comps);
  a_.resize(comps);
  for (std::size_t z = 0; z < comps; ++z) {
    const std::size_t i = z_arm(z), c = control_arm();
    const double var = dist.covariance(i, i) + dist.covariance(c, c) - 2.0 * dist.covariance(i, c);
    if (!(var > 0.0)) throw DomainError("power: comparison variance is not positive");
    sd[z] = std::sqrt(var);
    a_[z] = (dist.mean[i] - dist.mean[c]) / sd[z];
  }

  e_.assign(n_sim * comps, 0.0);
  parallel_for(chunk_count(n_sim), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kRowsPerStream;
    const std::size_t rows = std::min(n_sim, begin + kRowsPerStream) - begin;
    std::vector<double> z(rows * arms), y(arms);
    fill_normal_chunk(seed, chunk, rows, arms, z.data());
    for (std::size_t r = 0; r < rows; ++r) {
      const double* zr = z.data() + r * arms;
      for (std::size_t i = 0; i < arms; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * zr[k];
        y[i] = s;
      }
      double* er = e_.data() + (begin + r) * comps;
      for (std::size_t zc = 0; zc < comps; ++zc) er[zc] = (y[z_arm(zc)] - y[control_arm()]) / sd[zc];
    }
  });
}

PowerDetail CrnPowerEvaluator::evaluate(double N) const {
  if (!(N > 0.0)) throw DomainError("power: N must be positive");
  const std::size_t comps = a_.size();
  const double root_n = std::sqrt(N);
  std::vector<double> shift(comps);
  for (std::size_t z = 0; z < comps; ++z) shift[z] = root_n * a_[z];
  std::vector<std::size_t> hits(comps, 0);
  std::size_t all = 0, any = 0;
  for (std::size_t r = 0; r < n_sim_; ++r) {
    const double* er = e_.data() + r * comps;
    std::size_t count = 0;
    for (std::size_t z = 0; z < comps; ++z) {
      const bool rej = std::fabs(shift[z] + er[z]) > critical_value_;
      hits[z] += rej;
      count += rej;
    }
    all += count == comps;
    any += count > 0;
  }
  PowerDetail d;
  const double n = static_cast<double>(n_sim_);
  d.n_sim = n_sim_;
  d.power = 1.0;
  for (std::size_t z = 0; z < comps; ++z) {
    d.per_comparison.push_back(static_cast<double>(hits[z]) / n);
    d.power = std::min(d.power, d.per_comparison.back());
  }
  d.reject_all = static_cast<double>(all) / n;
  d.reject_any = static_cast<double>(any) / n;
  return d;
}

PowerDetail mc_power_detail(const PowerRequest& request) {
  request.validate();
  return CrnPowerEvaluator(request.scenario, request.alloc, request.critical_value, request.n_sim, request.seed)
      .evaluate(request.N);
}

double mc_power(const PowerRequest& request) { return mc_power_detail(request).power; }

SearchOutcome search_sample_size(const std::function<double(long)>& power, double target, long N0, long floor,
                                 long cap) {
  if (!(target > 0.0 && target < 1.0)) throw DomainError("target power must lie in (0, 1)");
  if (floor < 1 || N0 < floor) throw DomainError("initial sample size is below the smallest feasible design");
  if (cap < N0) throw DomainError("sample size cap is below the initial sample size");
  SearchOutcome out;
  std::map<long, double> seen;
  auto eval = [&](long N) {
    auto it = seen.find(N);
    if (it != seen.end()) return it->second;
    const double p = power(N);
    seen.emplace(N, p);
    out.trace.push_back({N, p});
    return p;
  };

  long lo, hi;
  if (eval(N0) >= target) {
    lo = floor;
    hi = N0;
    if (lo < hi && eval(lo) >= target) hi = lo;
  } else {
    long N = N0;
    while (true) {
      lo = N;
      if (N >= cap) {
        std::ostringstream msg;
        msg << "sample size search reached the cap N = " << cap << " with power " << eval(N) << " < " << target;
        throw BudgetExceeded(msg.str());
      }
      N = std::min(cap, 2 * N);
      if (eval(N) >= target) break;
    }
    hi = N;
  }
  // lo fails (or is the floor and untested), hi passes.
  while (lo < hi) {
    const long mid = (lo + hi) / 2;
    if (eval(mid) >= target)
      hi = mid;
    else
      lo = mid + 1;
  }
  out.N_star = hi;
  out.power = eval(hi);
  return out;
}

std::vector<long> round_allocation(const Allocation& alloc, long N) {
  alloc.validate();
  const std::size_t n = alloc.ratios.size();
  if (N < static_cast<long>(n)) throw DomainError("round_allocation: N must allow one subject per arm");
  std::vector<long> counts(n);
  std::vector<std::pair<double, std::size_t>> rem;
  long used = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double x = alloc.ratios[j] * static_cast<double>(N);
    counts[j] = static_cast<long>(std::floor(x));
    rem.push_back({x - static_cast<double>(counts[j]), j});
    used += counts[j];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < N; ++i, ++used) ++counts[rem[i % n].second];
  // Arms rounded to 0 borrow from the largest arm.
  for (std::size_t j = 0; j < n; ++j)
    while (counts[j] < 1) {
      const auto big = std::max_element(counts.begin(), counts.end()) - counts.begin();
      --counts[static_cast<std::size_t>(big)];
      ++counts[j];
    }
  return counts;
}

SampleSizeResult find_sample_size(const DesignScenario& scenario, const Allocation& alloc, double critical_value,
                                  double target_power, const SampleSizeOptions& options) {
  scenario.validate(true);
  alloc.validate();
  const long floor = static_cast<long>(arm_count(scenario.K));
  if (options.N0 < floor) throw DomainError("N0 must be at least 2K+1");
  if (options.n_sim < 1000) throw DomainError("n_sim must be at least 1000");
  const CrnPowerEvaluator evaluator(scenario, alloc, critical_value, options.n_sim, options.seed);
  const SearchOutcome s = search_sample_size([&](long N) { return evaluator.power(static_cast<double>(N)); },
                                             target_power, options.N0, floor, options.max_N);
  SampleSizeResult out;
  out.N_star = s.N_star;
  out.search_power = s.power;
  out.search_trace = s.trace;
  out.arm_counts = round_allocation(alloc, s.N_star);

  Allocation rounded;
  for (long c : out.arm_counts) rounded.ratios.push_back(static_cast<double>(c) / static_cast<double>(s.N_star));
  // Rounded ratios sum to 1 up to a few ulps; renormalize to stay within validation.
  double sum = 0.0;
  for (double p : rounded.ratios) sum += p;
  for (double& p : rounded.ratios) p /= sum;
  out.detail = CrnPowerEvaluator(scenario, rounded, critical_value, options.n_sim, options.seed)
                   .evaluate(static_cast<double>(s.N_star));
  out.achieved_power = out.detail.power;

  // MC error of the power estimate divided by the slope of the power curve.
  const double n_star = static_cast<double>(s.N_star);
  const double slope = (min_marginal_power(scenario, alloc, critical_value, n_star + 1.0) -
                        min_marginal_power(scenario, alloc, critical_value, std::max(1.0, n_star - 1.0))) /
                       (n_star + 1.0 - std::max(1.0, n_star - 1.0));
  const double p = std::clamp(s.power, 1e-6, 1.0 - 1e-6);
  const double se_p = std::sqrt(p * (1.0 - p) / static_cast<double>(options.n_sim));
  out.N_star_stderr = slope > 0.0 ? se_p / slope : 0.0;
  return out;
}

}  // namespace comboplat

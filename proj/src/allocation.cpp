#include "comboplat/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "comboplat/errors.hpp"
#include "comboplat/random.hpp"

namespace comboplat {

Allocation softmax_to_allocation(std::span<const double> theta) {
  if (theta.size() < 3 || theta.size() % 2 == 0) throw DomainError("softmax_to_allocation: theta needs 2K+1 entries");
  for (double t : theta)
    if (!std::isfinite(t)) throw DomainError("softmax_to_allocation: theta must be finite");
  const double top = *std::max_element(theta.begin(), theta.end());
  Allocation a;
  a.ratios.resize(theta.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < theta.size(); ++j) sum += a.ratios[j] = std::exp(theta[j] - top);
  for (double& p : a.ratios) p /= sum;
  return a;
}

namespace {

// W pairs without validation; NaN/inf propagate to the caller.
void noncentrality_raw(const DesignScenario& sc, const std::vector<double>& p, double N, std::vector<Noncentrality>& out) {
  out.resize(sc.K);
  const double pa = p[0];
  for (std::size_t k = 0; k < sc.K; ++k) {
    const double pb = p[arm_index(k, ArmRole::Mono)];
    const double pab = p[arm_index(k, ArmRole::Combo)];
    const double d2 = sc.delta[k] * sc.delta[k];
    const double s = sc.synergy[k];
    const double den1 = 1.0 / pab + 1.0 / pa - 2.0 * sc.rho_ABk_A[k] / std::sqrt(pab * pa);
    out[k].W1 = den1 > 0.0 ? N * s * s * d2 / (sc.sigma2 * den1) : std::numeric_limits<double>::quiet_NaN();
    out[k].W2 = N * d2 / (sc.sigma2 * (1.0 / pa + 1.0 / pb));
  }
}

}  // namespace

std::vector<Noncentrality> wald_noncentrality(const DesignScenario& scenario, const Allocation& alloc, double N) {
  scenario.validate(true);
  alloc.validate();
  if (alloc.K() != scenario.K) throw DomainError("wald_noncentrality: allocation and scenario disagree on K");
  if (!(N >= 1.0)) throw DomainError("wald_noncentrality: N must be at least 1");
  std::vector<Noncentrality> w;
  noncentrality_raw(scenario, alloc.ratios, N, w);
  for (const auto& x : w)
    if (std::isnan(x.W1))
      throw DomainError("wald_noncentrality: combination-vs-control variance is not positive (check rho_AB_A)");
  return w;
}

Allocation closed_form_allocation(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("closed_form_allocation: synergy must be positive");
  const double r = std::sqrt(s + 1.0);
  Allocation a;
  a.ratios = {(r - 1.0) / s, (s + 1.0 - r) / (s + 1.0), (s + 1.0 - r) / (s * (s + 1.0))};
  return a;
}

double maxmin_objective(const DesignScenario& scenario, const Allocation& alloc) {
  auto w = wald_noncentrality(scenario, alloc, 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : w) best = std::min({best, x.W1, x.W2});
  return best;
}

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
  const std::size_t n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  if (n == 0) {
    res.x = x0;
    res.value = eval(x0);
    res.converged = true;
    return res;
  }
  std::vector<std::vector<double>> pts(n + 1, x0);
  std::vector<double> val(n + 1);
  for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += options.initial_step;
  for (std::size_t i = 0; i <= n; ++i) val[i] = eval(pts[i]);

  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), xr(n), xe(n), xc(n);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[n - 1];

    double diameter = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      double d = 0.0;
      for (std::size_t j = 0; j < n; ++j) d = std::max(d, std::fabs(pts[i][j] - pts[best][j]));
      diameter = std::max(diameter, d);
    }
    const double spread = val[worst] - val[best];
    if (spread <= options.f_tol * std::max(1.0, std::fabs(val[best])) && diameter <= options.x_tol) {
      res.converged = true;
      break;
    }
    if (res.evaluations >= options.max_evaluations) break;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i)
      if (i != worst)
        for (std::size_t j = 0; j < n; ++j) centroid[j] += pts[i][j] / static_cast<double>(n);

    for (std::size_t j = 0; j < n; ++j) xr[j] = centroid[j] + (centroid[j] - pts[worst][j]);
    const double fr = eval(xr);
    if (fr < val[best]) {
      for (std::size_t j = 0; j < n; ++j) xe[j] = centroid[j] + 2.0 * (centroid[j] - pts[worst][j]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    // Contract toward the better of the worst point and its reflection.
    const bool outside = fr < val[worst];
    const auto& toward = outside ? xr : pts[worst];
    for (std::size_t j = 0; j < n; ++j) xc[j] = centroid[j] + 0.5 * (toward[j] - centroid[j]);
    const double fc = eval(xc);
    if (fc < std::min(fr, val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      val[i] = eval(pts[i]);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  res.x = pts[best];
  res.value = val[best];
  return res;
}

AllocationResult optimize_allocation_detailed(const DesignScenario& scenario, const AllocationOptions& options) {
  scenario.validate();
  AllocationResult out;
  if (options.use_closed_form && scenario.K == 1 && scenario.rho_ABk_A[0] == 0.0 && scenario.synergy[0] > 0.0) {
    out.allocation = closed_form_allocation(scenario.synergy[0]);
    out.objective = maxmin_objective(scenario, out.allocation);
    out.closed_form = true;
    out.converged_starts = 1;
    out.start_objectives = {out.objective};
    return out;
  }
  if (options.starts == 0) throw DomainError("optimize_allocation: need at least one start");

  const std::size_t dim = 2 * scenario.K;  // theta_A pinned to 0
  // Dividing by the first substudy's delta^2/sigma2 makes the search path
  // independent of the overall effect scale.
  const double scale = scenario.sigma2 / (scenario.delta[0] * scenario.delta[0]);
  auto objective = [&](std::span<const double> free) {
    std::vector<double> p(dim + 1);
    double top = 0.0;
    for (double t : free) {
      if (!std::isfinite(t)) return std::numeric_limits<double>::infinity();
      top = std::max(top, t);
    }
    double sum = p[0] = std::exp(-top);
    for (std::size_t j = 0; j < dim; ++j) sum += p[j + 1] = std::exp(free[j] - top);
    for (double& v : p) {
      v /= sum;
      if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
    }
    std::vector<Noncentrality> w;
    noncentrality_raw(scenario, p, 1.0, w);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : w) m = std::min({m, x.W1, x.W2});
    return std::isfinite(m) ? -m * scale : std::numeric_limits<double>::infinity();
  };

  struct StartResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
  };
  std::vector<StartResult> results(options.starts);
  parallel_for(options.starts, [&](std::size_t i) {
    std::vector<double> x0(dim, 0.0);
    if (i > 0) {
      NormalStream stream(options.seed, i);
      for (double& v : x0) v = stream.normal();
    }
    NelderMeadResult r = nelder_mead(objective, x0, options.simplex);
    // Restart from the best vertex; a fresh simplex escapes kinks of the min().
    for (std::size_t k = 0; k < options.restarts; ++k) {
      NelderMeadResult again = nelder_mead(objective, r.x, options.simplex);
      const bool better = again.value < r.value - 1e-13 * std::max(1.0, std::fabs(r.value));
      if (again.value <= r.value) r = std::move(again);
      if (!better) break;
    }
    results[i] = {r.x, r.value, r.converged && std::isfinite(r.value)};
  });

  std::size_t winner = options.starts;
  for (std::size_t i = 0; i < options.starts; ++i) {
    out.start_objectives.push_back(-results[i].value / scale);
    if (!results[i].converged) continue;
    ++out.converged_starts;
    if (winner == options.starts || results[i].value < results[winner].value) winner = i;
  }
  if (winner == options.starts) {
    std::ostringstream msg;
    msg << "optimize_allocation: simplex search did not converge from any of " << options.starts << " starts";
    throw ConvergenceError(msg.str());
  }
  std::vector<double> theta(dim + 1, 0.0);
  std::copy(results[winner].x.begin(), results[winner].x.end(), theta.begin() + 1);
  out.allocation = softmax_to_allocation(theta);
  out.objective = maxmin_objective(scenario, out.allocation);
  return out;
}

}  // namespace comboplat

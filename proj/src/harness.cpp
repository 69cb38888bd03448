#include "comboplat/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>

#include "comboplat/allocation.hpp"
#include "comboplat/correlation.hpp"
#include "comboplat/errors.hpp"
#include "comboplat/multiplicity.hpp"
#include "comboplat/normal.hpp"
#include "comboplat/power.hpp"
#include "comboplat/random.hpp"

namespace comboplat {

namespace {

const double kUnadjusted = 1.959963984540054;  // Phi^-1(0.975)

// Round grid coordinates so 0.05 + 25 * 0.01 prints as 0.3.
double tidy(double v) { return std::round(v * 1e12) / 1e12; }

struct CurvePoint {
  std::string label;
  double p_A, p_B, p_AB;
  double rho_AB_A, rho_AB_B, rho_z;
  double rho_star;  // classical Dunnett correlation for the allocation
};

std::vector<CurvePoint> curve_points(const GridSpec& grid) {
  grid.validate();
  std::vector<CurvePoint> pts;
  const auto values = grid.sweep_values();
  auto allocs = grid.allocations.empty() ? default_allocations() : grid.allocations;
  for (const auto& named : allocs) {
    const Allocation& a = named.allocation;
    if (a.K() != 1) throw DomainError("curve studies take single-substudy allocations");
    for (double v : values) {
      SingleStudyArms arms;
      arms.n_A = a.p_A();
      arms.n_B = a.p_B();
      arms.n_AB = a.p_AB();
      arms.rho_AB_A = grid.fixed_or("rho_AB_A", 0.3);
      arms.rho_AB_B = grid.fixed_or("rho_AB_B", 0.3);
      arms.rho_A_B = grid.fixed_or("rho_A_B", 0.0);
      double rho_z;
      if (grid.sweep == "rho_AB_B") {
        arms.rho_AB_B = v;
        rho_z = test_stat_correlation(arms);
      } else if (grid.sweep == "rho_AB_A") {
        arms.rho_AB_A = v;
        rho_z = test_stat_correlation(arms);
      } else {
        rho_z = v;
      }
      pts.push_back({named.label, a.p_A(), a.p_B(), a.p_AB(), arms.rho_AB_A, arms.rho_AB_B, rho_z,
                     classical_dunnett_correlation(arms)});
    }
    if (grid.sweep == "rho_z") break;  // allocation plays no role
  }
  return pts;
}

std::vector<std::string> curve_columns(std::initializer_list<std::string> extra) {
  std::vector<std::string> cols{"allocation", "p_A", "p_B", "p_AB", "rho_AB_A", "rho_AB_B", "rho_z"};
  cols.insert(cols.end(), extra);
  return cols;
}

std::vector<Cell> curve_prefix(const CurvePoint& p) {
  return {p.label, p.p_A, p.p_B, p.p_AB, p.rho_AB_A, p.rho_AB_B, p.rho_z};
}

template <typename Body>
ResultTable collect(std::vector<std::string> columns, std::size_t n, Body body) {
  std::vector<std::vector<std::vector<Cell>>> parts(n);
  parallel_for(n, [&](std::size_t i) { parts[i] = body(i); });
  ResultTable t(std::move(columns));
  for (auto& rows : parts)
    for (auto& r : rows) t.add_row(std::move(r));
  return t;
}

bool isotonic(std::span<const double> v, std::span<const double> se, double k, double direction) {
  if (v.size() != se.size()) throw DomainError("isotonic check: values and errors differ in length");
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double step = direction * (v[i] - v[i - 1]);
    if (step > k * std::sqrt(se[i] * se[i] + se[i - 1] * se[i - 1])) return false;
  }
  return true;
}

}  // namespace

void GridSpec::validate() const {
  if (sweep != "rho_AB_B" && sweep != "rho_AB_A" && sweep != "rho_z")
    throw DomainError("GridSpec: sweep must be rho_AB_B, rho_AB_A or rho_z, got '" + sweep + "'");
  if (!(step > 0.0)) throw DomainError("GridSpec: step must be positive");
  if (!(to >= from)) throw DomainError("GridSpec: empty range");
  if (from < -1.0 || to > 1.0) throw DomainError("GridSpec: correlation range must lie in [-1, 1]");
  if (replications == 0) throw DomainError("GridSpec: replications must be positive");
  for (const auto& [key, v] : fixed)
    if (key.rfind("rho", 0) == 0 && !(v >= -1.0 && v <= 1.0))
      throw DomainError("GridSpec: fixed " + key + " outside [-1, 1]");
  for (const auto& a : allocations) a.allocation.validate();
}

std::vector<double> GridSpec::sweep_values() const {
  const auto n = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9)) + 1;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(tidy(from + static_cast<double>(i) * step));
  return out;
}

double GridSpec::fixed_or(const std::string& key, double fallback) const {
  auto it = fixed.find(key);
  return it == fixed.end() ? fallback : it->second;
}

std::vector<NamedAllocation> default_allocations() {
  auto mk = [](std::string label, std::vector<double> r) { return NamedAllocation{std::move(label), {std::move(r), {}}}; };
  return {mk("equal", {1.0 / 3, 1.0 / 3, 1.0 / 3}), mk("control-heavy", {0.5, 0.25, 0.25}),
          mk("mono-heavy", {0.25, 0.5, 0.25}), mk("combo-heavy", {0.25, 0.25, 0.5})};
}

GridSpec default_curve_grid() {
  GridSpec g;
  g.fixed = {{"rho_AB_A", 0.3}, {"rho_AB_B", 0.3}, {"rho_A_B", 0.0}};
  g.allocations = default_allocations();
  return g;
}

GridSpec default_design_surface_grid() {
  GridSpec g;
  g.fixed = {{"delta", 0.3}, {"sigma2", 1.0}, {"power", 0.8}};
  g.synergy_values = {0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  g.rho_values = {0.1, 0.3, 0.5, 0.7};
  g.n_sim = 10'000;
  g.N0 = 20;
  return g;
}

ResultTable run_error_curves(const GridSpec& grid) {
  const auto pts = curve_points(grid);
  return collect(curve_columns({"critical_value", "metric", "value", "mc_stderr", "baseline_fwer", "baseline_fmer",
                                "baseline_msfp"}),
                 pts.size(), [&](std::size_t i) {
                   const auto& p = pts[i];
                   const ErrorRates r = empirical_error_rates(CorrelationMatrix::bivariate(p.rho_z), kUnadjusted,
                                                              grid.replications, derive_seed(grid.seed, i));
                   std::vector<std::vector<Cell>> rows;
                   for (auto [name, v] : {std::pair{"FWER", r.fwer}, std::pair{"FMER", r.fmer}, std::pair{"MSFP", r.msfp}}) {
                     auto row = curve_prefix(p);
                     row.insert(row.end(), {kUnadjusted, std::string(name), v, r.std_error(v), kBaselineFwer,
                                            kBaselineFmer, kBaselineMsfp});
                     rows.push_back(std::move(row));
                   }
                   return rows;
                 });
}

ResultTable run_adjustment_comparison(const GridSpec& grid) {
  const auto pts = curve_points(grid);
  const double alpha = 0.05;
  return collect(curve_columns({"method", "metric", "value", "mc_stderr"}), pts.size(), [&](std::size_t i) {
    const auto& p = pts[i];
    const CorrelationMatrix z = CorrelationMatrix::bivariate(p.rho_z);
    const std::uint64_t seed = derive_seed(grid.seed, i);
    const double c_dunnett = generalized_dunnett_threshold(p.rho_star, ErrorMetric::fwer(alpha)).critical_value;
    const double bonf = bonferroni_threshold(2, alpha);
    using Decide = std::function<void(std::span<const double>, std::vector<bool>&)>;
    const std::vector<std::pair<std::string, Decide>> methods{
        {"NoAdj",
         [](std::span<const double> x, std::vector<bool>& r) {
           for (std::size_t j = 0; j < x.size(); ++j) r[j] = std::fabs(x[j]) > kUnadjusted;
         }},
        {"Bonferroni",
         [bonf](std::span<const double> x, std::vector<bool>& r) {
           for (std::size_t j = 0; j < x.size(); ++j) r[j] = 2.0 * std_normal_sf(std::fabs(x[j])) <= bonf;
         }},
        {"Holm",
         [alpha](std::span<const double> x, std::vector<bool>& r) {
           std::vector<double> pv(x.size());
           for (std::size_t j = 0; j < x.size(); ++j) pv[j] = 2.0 * std_normal_sf(std::fabs(x[j]));
           const auto d = holm_reject(pv, alpha);
           for (std::size_t j = 0; j < x.size(); ++j) r[j] = d[j];
         }},
        {"Dunnett",
         [c_dunnett](std::span<const double> x, std::vector<bool>& r) {
           for (std::size_t j = 0; j < x.size(); ++j) r[j] = std::fabs(x[j]) > c_dunnett;
         }},
    };
    std::vector<std::vector<Cell>> rows;
    for (const auto& [method, decide] : methods) {
      const ErrorRates r = empirical_error_rates_with(z, grid.replications, seed, decide);
      for (auto [name, v] : {std::pair{"FWER", r.fwer}, std::pair{"FMER", r.fmer}, std::pair{"MSFP", r.msfp}}) {
        auto row = curve_prefix(p);
        row.insert(row.end(), {method, std::string(name), v, r.std_error(v)});
        rows.push_back(std::move(row));
      }
    }
    return rows;
  });
}

ResultTable run_threshold_curves(const GridSpec& grid) {
  const auto pts = curve_points(grid);
  return collect(curve_columns({"metric", "target", "critical_value", "value", "mc_stderr", "achieved_rate",
                                "achieved_stderr"}),
                 pts.size(), [&](std::size_t i) {
                   const auto& p = pts[i];
                   const CorrelationMatrix z = CorrelationMatrix::bivariate(p.rho_z);
                   std::vector<std::vector<Cell>> rows;
                   for (const ErrorMetric& m : {ErrorMetric::fwer(0.05), ErrorMetric::fmer(0.0025),
                                                ErrorMetric::msfp(0.000625)}) {
                     const ThresholdResult t = generalized_dunnett_threshold(p.rho_z, m);
                     const ErrorRates r =
                         empirical_error_rates(z, t.critical_value, grid.replications, derive_seed(grid.seed, i));
                     const double achieved = m.kind == MetricKind::FWER ? r.fwer
                                             : m.kind == MetricKind::FMER ? r.fmer
                                                                          : r.msfp;
                     auto row = curve_prefix(p);
                     row.insert(row.end(), {m.name(), m.alpha, t.critical_value, t.p_threshold, 0.0, achieved,
                                            r.std_error(achieved)});
                     rows.push_back(std::move(row));
                   }
                   return rows;
                 });
}

ResultTable run_design_surface(const GridSpec& grid, const ProgressFn& progress) {
  if (grid.synergy_values.empty() || grid.rho_values.empty())
    throw DomainError("design surface: synergy and rho lists must be non-empty");
  const double delta = grid.fixed_or("delta", 0.3);
  const double sigma2 = grid.fixed_or("sigma2", 1.0);
  const double target = grid.fixed_or("power", 0.8);
  struct Pt {
    double s, rho;
  };
  std::vector<Pt> pts;
  for (double s : grid.synergy_values)
    for (double rho : grid.rho_values) pts.push_back({tidy(s), tidy(rho)});
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  // Every point reuses the grid seed: common random numbers keep the surface
  // smooth across s and rho.
  return collect({"s", "rho", "metric", "target", "critical_value", "p_threshold", "p_A", "p_B", "p_AB", "N_star",
                  "value", "mc_stderr", "search_power", "achieved_power", "n_A", "n_B", "n_AB"},
                 pts.size(), [&](std::size_t i) {
                   const auto [s, rho] = pts[i];
                   const DesignScenario sc = DesignScenario::single(delta, s, rho, rho, sigma2);
                   const Allocation alloc = optimize_allocation(sc);
                   const double rho_z = design_z_correlation(sc, alloc)(0, 1);
                   std::vector<std::vector<Cell>> rows;
                   for (const ErrorMetric& m : {ErrorMetric::fwer(0.05), ErrorMetric::fmer(0.0025),
                                                ErrorMetric::msfp(0.000625)}) {
                     const ThresholdResult t = generalized_dunnett_threshold(rho_z, m);
                     SampleSizeOptions opt;
                     opt.N0 = grid.N0;
                     opt.n_sim = grid.n_sim;
                     opt.seed = grid.seed;
                     const SampleSizeResult r = find_sample_size(sc, alloc, t, target, opt);
                     rows.push_back({s, rho, m.name(), m.alpha, t.critical_value, t.p_threshold, alloc.p_A(),
                                     alloc.p_B(), alloc.p_AB(), std::int64_t{r.N_star},
                                     static_cast<double>(r.N_star), r.N_star_stderr, r.search_power, r.achieved_power,
                                     std::int64_t{r.arm_counts[0]}, std::int64_t{r.arm_counts[1]},
                                     std::int64_t{r.arm_counts[2]}});
                   }
                   const std::size_t n = ++done;
                   if (progress) {
                     std::lock_guard lock(progress_mutex);
                     progress(n, pts.size());
                   }
                   return rows;
                 });
}

bool is_nonincreasing(std::span<const double> values, std::span<const double> std_errors, double k) {
  return isotonic(values, std_errors, k, 1.0);
}

bool is_nondecreasing(std::span<const double> values, std::span<const double> std_errors, double k) {
  return isotonic(values, std_errors, k, -1.0);
}

}  // namespace comboplat

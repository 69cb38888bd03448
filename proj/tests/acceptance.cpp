// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here and never adjusted to the implementation's output.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "comboplat/allocation.hpp"
#include "comboplat/cli.hpp"
#include "comboplat/correlation.hpp"
#include "comboplat/harness.hpp"
#include "comboplat/multiplicity.hpp"
#include "comboplat/power.hpp"
#include "oracles.hpp"

using namespace comboplat;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Report {
 public:
  void add(std::ostringstream& s, const std::string& item, bool ok) {
    s << (ok ? "" : "!") << item << "; ";
    pass_ = pass_ && ok;
  }
  bool pass_ = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// 1: two independent trials at the unadjusted 5% level.
Outcome null_baselines() {
  std::ostringstream s;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rates = empirical_error_rates(CorrelationMatrix::identity(2), 1.959963984540054, 100000, 101);
  const double secs = seconds_since(t0);
  r.add(s, "FWER=" + fmt(rates.fwer, 5) + " (0.0975+-0.003)", std::abs(rates.fwer - 0.0975) <= 0.003);
  r.add(s, "FMER=" + fmt(rates.fmer, 5) + " (0.0025+-0.0006)", std::abs(rates.fmer - 0.0025) <= 0.0006);
  r.add(s, "MSFP=" + fmt(rates.msfp, 5) + " (0.000625+-0.0003)", std::abs(rates.msfp - 0.000625) <= 0.0003);
  r.add(s, "runtime " + fmt(secs, 3) + " s (< 5)", secs < 5.0);
  return {r.pass_, s.str()};
}

// 2: thresholds re-applied in fresh null simulations.
Outcome threshold_round_trip() {
  std::ostringstream s;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<ErrorMetric> metrics = {ErrorMetric::fwer(0.05), ErrorMetric::fmer(0.0025), ErrorMetric::msfp(0.000625)};
  int failures = 0, checks = 0;
  double worst = 0.0;
  std::uint64_t seed = 200;
  for (double rho : {0.0, 0.3, 0.461, 0.7, 0.95}) {
    for (const auto& m : metrics) {
      const auto t = generalized_dunnett_threshold(rho, m);
      const auto e = empirical_error_rates(CorrelationMatrix::bivariate(rho), t.critical_value, 100000, ++seed);
      const double got = m.kind == MetricKind::FWER ? e.fwer : m.kind == MetricKind::FMER ? e.fmer : e.msfp;
      const double z = std::abs(got - m.alpha) / e.std_error(m.alpha);
      worst = std::max(worst, z);
      ++checks;
      if (z > 3.0) {
        ++failures;
        s << "!rho=" << rho << " " << m.name() << " rate " << fmt(got, 4) << "; ";
      }
    }
  }
  const double secs = seconds_since(t0);
  r.add(s, std::to_string(checks - failures) + "/" + std::to_string(checks) + " within 3 SE (worst " + fmt(worst, 3) + " SE)",
        failures == 0);
  r.add(s, "runtime " + fmt(secs, 3) + " s (< 60)", secs < 60.0);
  return {r.pass_, s.str()};
}

// 3: closed-form limits and the classical procedure against quadrature.
Outcome sidak_dunnett() {
  std::ostringstream s;
  Report r;
  const double c0 = generalized_dunnett_threshold(0.0, ErrorMetric::fwer(0.05)).critical_value;
  r.add(s, "c*(rho=0)=" + fmt(c0, 7) + " (2.2365+-1e-3)", std::abs(c0 - 2.2365) <= 1e-3);
  const double c1 = generalized_dunnett_threshold(1.0 - 1e-9, ErrorMetric::fwer(0.05)).critical_value;
  r.add(s, "c*(rho->1)=" + fmt(c1, 7) + " (1.95996+-1e-3)", std::abs(c1 - 1.95996) <= 1e-3);
  SingleStudyArms arms;
  arms.n_A = arms.n_B = arms.n_AB = 50;
  const auto d = classical_dunnett_threshold(arms, 0.05);
  const double ref = oracle::solve([](double c) { return oracle::fwer2(c, 0.5); }, 0.05);
  r.add(s, "Dunnett c*(rho*=0.5)=" + fmt(d.critical_value, 9) + " vs oracle " + fmt(ref, 9) + " (1e-4)",
        std::abs(d.critical_value - ref) <= 1e-4 && std::abs(d.z_correlation(0, 1) - 0.5) < 1e-12);
  return {r.pass_, s.str()};
}

// 4: published closed form against grid search, numerical optimizer against closed form.
Outcome closed_form_allocation_check() {
  std::ostringstream s;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  for (double sv : {0.7, 1.0, 2.0}) {
    const auto cf = closed_form_allocation(sv);
    const auto grid = oracle::grid_maxmin(sv, 0.0, 1e-3);
    const auto opt = optimize_allocation(DesignScenario::single(1.0, sv, 0.0, 0.0));
    double dg = 0.0, dn = 0.0;
    for (int i = 0; i < 3; ++i) {
      dg = std::max(dg, std::abs(cf.ratios[i] - grid.p[i]));
      dn = std::max(dn, std::abs(opt.ratios[i] - cf.ratios[i]));
    }
    std::ostringstream item;
    item << "s=" << sv << ": closed form (" << fmt(cf.ratios[0], 4) << ", " << fmt(cf.ratios[1], 4) << ", "
         << fmt(cf.ratios[2], 4) << ") grid (" << fmt(grid.p[0], 4) << ", " << fmt(grid.p[1], 4) << ", "
         << fmt(grid.p[2], 4) << ") max|diff| " << fmt(dg, 3) << " (<= 1e-3); optimizer max|diff| " << fmt(dn, 3)
         << " (<= 1e-3)";
    r.add(s, item.str(), dg <= 1e-3 + 1e-12 && dn <= 1e-3);
  }
  const double secs = seconds_since(t0);
  r.add(s, "runtime " + fmt(secs, 3) + " s (< 10)", secs < 10.0);
  return {r.pass_, s.str()};
}

// 5: published design parameters through the full pipeline.
Outcome table2() {
  std::ostringstream s;
  Report r;
  struct Row {
    const char* name;
    double s, delta, rho_a, rho_b;
    std::array<double, 3> alloc;
    long n;
  };
  const Row rows[] = {{"encorafenib/binimetinib", 1.161, 0.663, 0.626, 0.660, {0.445, 0.450, 0.105}, 97},
                      {"LEE011/everolimus", 2.283, 0.329, 0.227, 0.250, {0.501, 0.455, 0.044}, 365}};
  for (const auto& row : rows) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sc = DesignScenario::single(row.delta, row.s, row.rho_a, row.rho_b);
    const auto al = optimize_allocation(sc);
    const auto z = design_z_correlation(sc, al);
    const auto th = generalized_dunnett_threshold(z(0, 1), ErrorMetric::fwer(0.05));
    SampleSizeOptions o;
    o.n_sim = 10000;
    o.seed = 2024;
    const auto n = find_sample_size(sc, al, th, 0.8, o);
    const double secs = seconds_since(t0);
    double da = 0.0;
    for (int i = 0; i < 3; ++i) da = std::max(da, std::abs(al.ratios[i] - row.alloc[i]));
    std::ostringstream a, b;
    a << row.name << " allocation (" << fmt(al.ratios[0], 4) << ", " << fmt(al.ratios[1], 4) << ", "
      << fmt(al.ratios[2], 4) << ") max|diff| " << fmt(da, 3) << " (<= 0.01)";
    r.add(s, a.str(), da <= 0.01);
    b << row.name << " N*=" << n.N_star << " (" << row.n << " +-10%), " << fmt(secs, 3) << " s";
    r.add(s, b.str(),
          std::abs(static_cast<double>(n.N_star - row.n)) <= 0.1 * static_cast<double>(row.n) && secs < 120.0);
  }
  return {r.pass_, s.str()};
}

// 6: thresholds at the estimated test correlation.
Outcome table1() {
  std::ostringstream s;
  Report r;
  const std::pair<ErrorMetric, double> cases[] = {
      {ErrorMetric::fwer(0.05), 0.027}, {ErrorMetric::fmer(0.0025), 0.022}, {ErrorMetric::msfp(0.000625), 0.013}};
  for (const auto& [m, expect] : cases) {
    const double p = generalized_dunnett_threshold(0.461, m).p_threshold;
    r.add(s, m.name() + " p=" + fmt(p, 4) + " (" + fmt(expect) + "+-0.002)", std::abs(p - expect) <= 0.002);
  }
  return {r.pass_, s.str()};
}

// 7: simulated power against the min-of-marginals formula.
Outcome power_oracle() {
  std::ostringstream s;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(77);
  std::uniform_real_distribution<double> delta(0.2, 0.8), syn(0.7, 1.6), rho(0.0, 0.6), w(0.2, 1.0), c(1.96, 2.5),
      N(40.0, 300.0);
  double worst = 0.0;
  int fails = 0;
  for (int i = 0; i < 20; ++i) {
    const auto sc = DesignScenario::single(delta(gen), syn(gen), rho(gen), rho(gen));
    const double a = w(gen), b = w(gen), d = w(gen);
    Allocation al;
    al.ratios = {a / (a + b + d), b / (a + b + d), d / (a + b + d)};
    const double cv = c(gen), n = std::round(N(gen));
    const double p = mc_power(PowerRequest{sc, al, cv, n, 100000, static_cast<std::uint64_t>(1000 + i)});
    const auto wr = oracle::wald(al.ratios[0], al.ratios[1], al.ratios[2], sc.synergy[0], sc.rho_ABk_A[0],
                                 sc.delta[0], sc.sigma2);
    const double ref = std::min(oracle::marginal_power(n * wr[0], cv), oracle::marginal_power(n * wr[1], cv));
    worst = std::max(worst, std::abs(p - ref));
    if (std::abs(p - ref) > 0.01) ++fails;
  }
  const double secs = seconds_since(t0);
  r.add(s, "20 scenarios, max|diff| " + fmt(worst, 3) + " (<= 0.01), " + std::to_string(fails) + " outside", fails == 0);
  r.add(s, "runtime " + fmt(secs, 3) + " s (< 60)", secs < 60.0);
  return {r.pass_, s.str()};
}

// 8: monotonicity properties of the full design surface.
Outcome design_surface() {
  std::ostringstream s;
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  const auto t = run_design_surface(default_design_surface_grid());
  const double secs = seconds_since(t0);
  struct Pt {
    double n, se, pab;
  };
  std::map<std::tuple<double, double, std::string>, Pt> pts;
  std::vector<double> svals, rvals;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double sv = t.number(i, "s"), rv = t.number(i, "rho");
    pts[{sv, rv, t.text(i, "metric")}] = {t.number(i, "N_star"), t.number(i, "mc_stderr"), t.number(i, "p_AB")};
    if (std::find(svals.begin(), svals.end(), sv) == svals.end()) svals.push_back(sv);
    if (std::find(rvals.begin(), rvals.end(), rv) == rvals.end()) rvals.push_back(rv);
  }
  std::sort(svals.begin(), svals.end());
  std::sort(rvals.begin(), rvals.end());
  int n_bad = 0, p_bad = 0, m_bad = 0;
  for (const std::string m : {"FWER", "FMER", "MSFP"})
    for (double rv : rvals) {
      std::vector<double> v, se;
      for (double sv : svals) {
        v.push_back(pts[{sv, rv, m}].n);
        se.push_back(pts[{sv, rv, m}].se);
      }
      if (!is_nonincreasing(v, se)) ++n_bad;
    }
  for (double sv : svals) {
    std::vector<double> v, se;
    for (double rv : rvals) {
      v.push_back(pts[{sv, rv, "FWER"}].pab);
      se.push_back(0.0);  // deterministic optimizer output
    }
    if (!is_nonincreasing(v, se, 3.0)) ++p_bad;
    for (double rv : rvals) {
      const auto f = pts[{sv, rv, "FWER"}];
      for (const std::string m : {"FMER", "MSFP"}) {
        const auto g = pts[{sv, rv, m}];
        if (f.n - g.n > 3.0 * std::sqrt(f.se * f.se + g.se * g.se)) ++m_bad;
      }
    }
  }
  r.add(s, std::to_string(t.size()) + " grid points (84)", t.size() == 84);
  r.add(s, "N* nonincreasing in s: " + std::to_string(n_bad) + " violations", n_bad == 0);
  r.add(s, "p_AB nonincreasing in rho: " + std::to_string(p_bad) + " violations", p_bad == 0);
  r.add(s, "FWER N* <= FMER/MSFP N*: " + std::to_string(m_bad) + " violations", m_bad == 0);
  r.add(s, "runtime " + fmt(secs, 3) + " s (< 1800)", secs < 1800.0);
  return {r.pass_, s.str()};
}

// 9: analytic statistic correlations against simulated ones.
Outcome correlation_vs_simulation() {
  std::ostringstream s;
  Report r;
  std::mt19937_64 gen(909);
  std::uniform_real_distribution<double> n(5.0, 80.0), rho(0.0, 0.7);
  std::uniform_int_distribution<int> kdist(1, 3);
  double worst = 0.0;
  for (int cfg = 0; cfg < 20; ++cfg) {
    // redraw until the arm-level correlation matrix is positive definite
    PlatformArms p;
    std::vector<double> counts;
    std::vector<std::vector<double>> rm;
    std::size_t arms = 0;
    for (bool valid = false; !valid;) {
      p = PlatformArms{};
      p.K = static_cast<std::size_t>(kdist(gen));
      p.n_A = n(gen);
      for (std::size_t k = 0; k < p.K; ++k) {
        p.n_B.push_back(n(gen));
        p.n_AB.push_back(n(gen));
        p.correlations.set(arm_index(k, ArmRole::Combo), control_arm(), rho(gen));
        p.correlations.set(arm_index(k, ArmRole::Combo), arm_index(k, ArmRole::Mono), rho(gen));
      }
      arms = arm_count(p.K);
      counts.assign(arms, 0.0);
      rm.assign(arms, std::vector<double>(arms));
      for (std::size_t i = 0; i < arms; ++i) {
        counts[i] = p.count(i);
        for (std::size_t j = 0; j < arms; ++j) rm[i][j] = i == j ? 1.0 : p.correlations.get(i, j);
      }
      valid = true;
      for (const auto& row : oracle::cholesky(rm))
        for (double v : row) valid = valid && std::isfinite(v);
    }
    const auto z = platform_z_correlation_matrix(p);
    std::vector<std::size_t> zarms;
    for (std::size_t q = 0; q < z.dim(); ++q) zarms.push_back(z_arm(q));
    const auto emp = oracle::empirical_z_correlation(counts, rm, zarms, 100000, 500u + static_cast<unsigned>(cfg));
    for (std::size_t i = 0; i < z.dim(); ++i)
      for (std::size_t j = 0; j < i; ++j) worst = std::max(worst, std::abs(emp[i][j] - z(i, j)));
  }
  r.add(s, "20 configurations (K in 1..3), max|analytic - empirical| " + fmt(worst, 3) + " (<= 0.015)", worst <= 0.015);
  return {r.pass_, s.str()};
}

// 10: reruns with the same seed give byte-identical files.
Outcome determinism() {
  std::ostringstream s;
  Report r;
  const auto dir = std::filesystem::temp_directory_path() / "comboplat_acceptance";
  std::filesystem::create_directories(dir);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"design.json", {"--format", "json", "--seed", "42", "design", "--delta", "0.663", "--synergy", "1.161",
                       "--rho-ab-a", "0.626", "--rho-ab-b", "0.660"}},
      {"platform.json", {"--format", "json", "--seed", "42", "design", "--k", "2", "--delta", "0.5", "--synergy",
                         "1.2", "--rho-ab-a", "0.3", "--rho-ab-b", "0.4", "--metric", "mfwer", "--m", "2"}},
      {"adjust.json", {"--format", "json", "--seed", "42", "adjust", "--k", "3", "--n-a", "40", "--n-b", "30",
                       "--n-ab", "30", "--rho-ab-a", "0.3", "--rho-ab-b", "0.5"}},
      {"curves.csv", {"--seed", "42", "simulate", "--study", "error-curves", "--reps", "20000"}},
      {"adjustments.jsonl", {"--seed", "42", "--format", "json", "simulate", "--study", "adjustments", "--reps", "20000"}},
      {"thresholds.csv", {"--seed", "42", "simulate", "--study", "thresholds", "--reps", "20000"}},
      {"surface.csv", {"--seed", "42", "simulate", "--study", "design-surface"}},
  };
  for (const auto& [name, args] : runs) {
    std::string first;
    bool ok = true;
    for (int rep = 0; rep < 2; ++rep) {
      auto a = args;
      a.push_back("--out");
      a.push_back((dir / name).string());
      // simulate takes --out after the subcommand as well; global position works for all
      std::ostringstream out, err;
      if (run_cli(a, out, err) != kExitOk) {
        ok = false;
        s << "!" << name << " failed: " << err.str() << "; ";
        break;
      }
      const std::string bytes = slurp(dir / name);
      if (rep == 0)
        first = bytes;
      else
        ok = ok && bytes == first && !bytes.empty();
    }
    r.add(s, name + (ok ? " identical" : " differs"), ok);
  }
  std::filesystem::remove_all(dir);
  return {r.pass_, s.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"null baselines", null_baselines},
      {"threshold round-trip", threshold_round_trip},
      {"Sidak/Dunnett oracles", sidak_dunnett},
      {"closed-form allocation", closed_form_allocation_check},
      {"published design table", table2},
      {"threshold table at rho=0.461", table1},
      {"power oracle equivalence", power_oracle},
      {"design surface properties", design_surface},
      {"correlation formula vs simulation", correlation_vs_simulation},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << (i + 1) << " (" << criteria[i].first
              << "): " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}

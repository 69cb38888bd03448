#include "comboplat/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "comboplat/allocation.hpp"
#include "comboplat/correlation.hpp"
#include "comboplat/errors.hpp"
#include "comboplat/estimation.hpp"
#include "comboplat/harness.hpp"
#include "comboplat/multiplicity.hpp"
#include "comboplat/power.hpp"
#include "comboplat/result_table.hpp"

namespace comboplat {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 20240917;

struct Options {
  // global
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "text";
  bool verbose = false;

  // thresholds
  std::string metric = "fwer";
  std::optional<double> alpha;
  std::size_t m = 2;
  std::string sidedness = "two-sided";
  std::string method = "generalized";
  std::optional<double> rho;
  std::optional<double> n_a;
  std::vector<double> n_b, n_ab;
  std::vector<double> rho_ab_a, rho_ab_b;
  double rho_a_b = 0.0;
  std::size_t k = 1;
  double precision = 1e-4;

  // design
  std::vector<double> delta, synergy;
  double sigma2 = 1.0;
  double power = 0.8;
  long n0 = 20;
  std::size_t nsim = 10'000;
  long max_n = 1'000'000;
  bool closed_form = false;
  std::vector<double> allocation;

  // estimate
  std::string input, drug_a, drug_b, combo, roles;
  std::string delimiter = ",";
  std::string model_column = "model_id", treatment_column = "treatment", response_column = "response";
  std::string duplicates = "error";
  bool flip_sign = false;
  std::size_t min_triples = 3;
  bool table1 = false;
  std::size_t reps = 100'000;

  // simulate
  std::string study;
  std::string sweep;
  std::optional<double> from, to, step;
  std::vector<double> rho_list;
};

// --flag: message, reported with exit code 2.
[[noreturn]] void fail(const std::string& flag, const std::string& msg) { throw DomainError(flag + ": " + msg); }

CLI::Validator open_unit() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v > 0.0 && v < 1.0) return {};
        } catch (...) {
        }
        return "value " + s + " must lie strictly between 0 and 1";
      },
      "(0,1)");
}

CLI::Validator positive() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          if (std::stod(s) > 0.0) return {};
        } catch (...) {
        }
        return "value " + s + " must be positive";
      },
      "> 0");
}

CLI::Validator correlation() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        try {
          const double v = std::stod(s);
          if (v >= -1.0 && v <= 1.0) return {};
        } catch (...) {
        }
        return "correlation " + s + " must lie in [-1, 1]";
      },
      "[-1,1]");
}

void add_metric_flags(CLI::App* sub, Options& o) {
  sub->add_option("--metric", o.metric, "Error metric to control")
      ->check(CLI::IsMember({"fwer", "fmer", "msfp", "mfwer"}))
      ->capture_default_str();
  sub->add_option("--alpha", o.alpha,
                  "Target level of the metric (default: fwer 0.05, fmer 0.0025, msfp 0.000625, mfwer 0.05)")
      ->check(open_unit());
  sub->add_option("--m", o.m, "Number of false rejections counted as an error (mfwer only)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--sidedness", o.sidedness, "Rejection convention for mfwer: two-sided |Z| > c or upper Z > c")
      ->check(CLI::IsMember({"two-sided", "upper"}))
      ->capture_default_str();
  sub->add_option("--precision", o.precision,
                  "Target standard error of simulated/lattice level estimates when K > 1 (probability)")
      ->check(positive())
      ->capture_default_str();
}

void add_arm_flags(CLI::App* sub, Options& o) {
  sub->add_option("--rho-ab-a", o.rho_ab_a, "Endpoint correlation combination vs control, per substudy")
      ->check(correlation());
  sub->add_option("--rho-ab-b", o.rho_ab_b, "Endpoint correlation combination vs its monotherapy, per substudy")
      ->check(correlation());
  sub->add_option("--k", o.k, "Number of substudies sharing the control")->check(CLI::PositiveNumber)->capture_default_str();
}

CLI::App* build_app(CLI::App& app, Options& o, CLI::App*& adjust, CLI::App*& design, CLI::App*& estimate,
                    CLI::App*& simulate) {
  app.fallthrough();
  app.require_subcommand(1);
  app.add_option("--config", o.config, "JSON file with option values (snake_case keys); flags take precedence")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "Random seed (default: $COMBOPLAT_SEED, else 20240917)");
  app.add_option("--out", o.out, "Write the report or table to this path instead of stdout");
  app.add_option("--format", o.format, "Output format: text (6 significant digits), json, csv")
      ->check(CLI::IsMember({"text", "json", "csv"}))
      ->capture_default_str();
  app.add_flag("--verbose", o.verbose, "Progress and diagnostics on stderr");

  adjust = app.add_subcommand("adjust", "Critical value and p-value threshold for an error metric");
  add_metric_flags(adjust, o);
  adjust->add_option("--method", o.method, "generalized (arm-aware correlation) or dunnett (classical rho*)")
      ->check(CLI::IsMember({"generalized", "dunnett"}))
      ->capture_default_str();
  adjust->add_option("--rho", o.rho, "Correlation of the two test statistics (K = 1), instead of arm inputs")
      ->check(correlation());
  adjust->add_option("--n-a", o.n_a, "Control arm size (subjects)")->check(positive());
  adjust->add_option("--n-b", o.n_b, "Monotherapy arm sizes, per substudy (subjects)")->check(positive());
  adjust->add_option("--n-ab", o.n_ab, "Combination arm sizes, per substudy (subjects)")->check(positive());
  adjust->add_option("--rho-a-b", o.rho_a_b, "Endpoint correlation control vs monotherapy")
      ->check(correlation())
      ->capture_default_str();
  add_arm_flags(adjust, o);

  design = app.add_subcommand("design", "Optimal allocation, threshold and minimal total sample size");
  add_metric_flags(design, o);
  add_arm_flags(design, o);
  design->add_option("--delta", o.delta, "Monotherapy effect size per substudy (endpoint units)")
      ->required()
      ->check(positive());
  design->add_option("--synergy", o.synergy, "Synergy s per substudy (combination effect = s * delta; default 1)");
  design->add_option("--sigma2", o.sigma2, "Common endpoint variance (endpoint units^2)")
      ->check(positive())
      ->capture_default_str();
  design->add_option("--power", o.power, "Target power (minimum per-comparison rejection rate)")
      ->check(open_unit())
      ->capture_default_str();
  design->add_option("--n0", o.n0, "Initial total sample size of the doubling search")->capture_default_str();
  design->add_option("--nsim", o.nsim, "Monte Carlo replications per power evaluation")->capture_default_str();
  design->add_option("--max-n", o.max_n, "Give up (exit 4) when the search passes this total size")
      ->capture_default_str();
  design->add_flag("--closed-form", o.closed_form, "Use the published analytic allocation when K = 1, rho-ab-a = 0");
  design->add_option("--allocation", o.allocation, "Fixed ratios p_A p_B1 p_AB1 ... instead of optimizing");

  estimate = app.add_subcommand("estimate", "Correlations, effect sizes and synergy from paired endpoint data");
  estimate->add_option("--input", o.input, "CSV with model, treatment and response columns")->required();
  estimate->add_option("--drug-a", o.drug_a, "Treatment label playing the control role A");
  estimate->add_option("--drug-b", o.drug_b, "Treatment label playing the monotherapy role B");
  estimate->add_option("--combo", o.combo, "Treatment label of the combination A+B");
  estimate->add_option("--roles", o.roles, "CSV of trials with columns drug_A, drug_B, combo");
  estimate->add_option("--delimiter", o.delimiter, "Field delimiter (single character)")->capture_default_str();
  estimate->add_option("--model-column", o.model_column, "Header of the model id column")->capture_default_str();
  estimate->add_option("--treatment-column", o.treatment_column, "Header of the treatment column")
      ->capture_default_str();
  estimate->add_option("--response-column", o.response_column, "Header of the response column (higher is better)")
      ->capture_default_str();
  estimate->add_option("--duplicates", o.duplicates, "Repeated (model, treatment) rows: error or mean")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();
  estimate->add_flag("--flip-sign", o.flip_sign, "Negate responses (for lower-is-better endpoints)");
  estimate->add_option("--min-triples", o.min_triples, "Minimum models with all three treatments")
      ->capture_default_str();
  estimate->add_flag("--table1", o.table1,
                     "Also report test correlation, unadjusted error rates at 1.96 and metric thresholds");
  estimate->add_option("--reps", o.reps, "Null replications for the unadjusted error rates")->capture_default_str();

  simulate = app.add_subcommand("simulate", "Reproduce a simulation study as a result table");
  simulate->add_option("--study", o.study, "Study to run")
      ->required()
      ->check(CLI::IsMember({"error-curves", "adjustments", "thresholds", "design-surface"}));
  simulate->add_option("--sweep", o.sweep, "Swept parameter for curve studies: rho_AB_B, rho_AB_A or rho_z");
  simulate->add_option("--from", o.from, "Sweep start (default 0.05)");
  simulate->add_option("--to", o.to, "Sweep end (default 0.95)");
  simulate->add_option("--step", o.step, "Sweep step (default 0.01)")->check(positive());
  simulate->add_option("--rho-ab-a", o.rho_ab_a, "Fixed combination-control correlation (default 0.3)")
      ->check(correlation());
  simulate->add_option("--rho-ab-b", o.rho_ab_b, "Fixed combination-monotherapy correlation (default 0.3)")
      ->check(correlation());
  simulate->add_option("--reps", o.reps, "Null replications per grid point")->capture_default_str();
  simulate->add_option("--synergy", o.synergy, "Design surface synergy values (default 0.7 .. 1.3 by 0.1)");
  simulate->add_option("--rho", o.rho_list, "Design surface values of rho_AB_A = rho_AB_B (default 0.1 0.3 0.5 0.7)")
      ->check(correlation());
  simulate->add_option("--delta", o.delta, "Design surface effect size (default 0.3)")->check(positive());
  simulate->add_option("--sigma2", o.sigma2, "Design surface endpoint variance")->check(positive())->capture_default_str();
  simulate->add_option("--power", o.power, "Design surface target power")->check(open_unit())->capture_default_str();
  simulate->add_option("--n0", o.n0, "Design surface initial total sample size")->capture_default_str();
  simulate->add_option("--nsim", o.nsim, "Design surface replications per power evaluation")->capture_default_str();
  return &app;
}

// ---- output ----

std::string human_number(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

std::string human_value(const ojson& v) {
  if (v.is_number_float()) return human_number(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "NA";
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + human_value(x);
    return s;
  }
  return v.dump();
}

std::string csv_value(const ojson& v) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ";") + csv_value(x);
    return s;
  }
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

// Objects print as aligned key/value lines in text mode; keys starting with
// an underscore are JSON-only detail.
void render_object(const ojson& obj, const std::string& format, std::ostream& out, bool header = true) {
  if (format == "json") {
    out << obj.dump(2) << '\n';
    return;
  }
  std::vector<std::string> keys;
  for (const auto& [k, v] : obj.items())
    if (k.empty() || k[0] != '_') keys.push_back(k);
  if (format == "csv") {
    if (header) {
      for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << keys[i];
      out << '\n';
    }
    for (std::size_t i = 0; i < keys.size(); ++i) out << (i ? "," : "") << csv_value(obj[keys[i]]);
    out << '\n';
    return;
  }
  std::size_t width = 0;
  for (const auto& k : keys) width = std::max(width, k.size());
  for (const auto& k : keys) out << std::left << std::setw(static_cast<int>(width + 2)) << k << human_value(obj[k]) << '\n';
}

void render(const ojson& report, const std::string& format, std::ostream& out) {
  if (report.is_array() && format != "json") {
    for (std::size_t i = 0; i < report.size(); ++i) {
      if (format == "text" && i > 0) out << '\n';
      render_object(report[i], format, out, i == 0);
    }
    return;
  }
  render_object(report, format, out);
}

// ---- helpers ----

std::uint64_t resolve_seed(const Options& o) {
  if (o.seed) return *o.seed;
  if (const char* env = std::getenv("COMBOPLAT_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used);
      if (used == s.size()) return v;
    } catch (...) {
    }
    throw DomainError(std::string("COMBOPLAT_SEED: '") + env + "' is not an unsigned integer");
  }
  return kDefaultSeed;
}

ErrorMetric make_metric(const Options& o) {
  ErrorMetric m;
  if (o.metric == "fwer")
    m = ErrorMetric::fwer(o.alpha.value_or(0.05));
  else if (o.metric == "fmer")
    m = ErrorMetric::fmer(o.alpha.value_or(0.0025));
  else if (o.metric == "msfp")
    m = ErrorMetric::msfp(o.alpha.value_or(0.000625));
  else
    m = ErrorMetric::mfwer(o.m, o.alpha.value_or(0.05), o.sidedness == "upper" ? Sidedness::Upper : Sidedness::TwoSided);
  return m;
}

std::vector<double> per_substudy(const std::vector<double>& v, std::size_t K, const std::string& flag,
                                 std::optional<double> fallback) {
  if (v.empty()) {
    if (!fallback) fail(flag, "required");
    return std::vector<double>(K, *fallback);
  }
  if (v.size() == 1) return std::vector<double>(K, v[0]);
  if (v.size() != K) fail(flag, "expected 1 or " + std::to_string(K) + " values, got " + std::to_string(v.size()));
  return v;
}

ojson matrix_json(const Matrix& m) {
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    ojson r = ojson::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

void add_threshold(ojson& rep, const ThresholdResult& t) {
  rep["metric"] = t.metric.name();
  rep["alpha"] = t.metric.alpha;
  rep["critical_value"] = t.critical_value;
  rep["p_threshold"] = t.p_threshold;
  rep["achieved_level"] = t.achieved_level;
  rep["achieved_stderr"] = t.achieved_std_error;
}

// ---- subcommands ----

ojson cmd_adjust(const Options& o, std::uint64_t seed) {
  const ErrorMetric metric = make_metric(o);
  const bool arm_inputs = o.n_a || !o.n_b.empty() || !o.n_ab.empty() || !o.rho_ab_a.empty() || !o.rho_ab_b.empty();
  ojson rep;
  if (o.method == "dunnett") {
    if (o.metric != "fwer") fail("--method", "classical Dunnett controls fwer only");
    if (o.k != 1) fail("--method", "classical Dunnett is defined for K = 1");
    if (!o.n_a || o.n_b.size() != 1 || o.n_ab.size() != 1) fail("--n-a", "--n-a, --n-b and --n-ab are required");
    SingleStudyArms arms;
    arms.n_A = *o.n_a;
    arms.n_B = o.n_b[0];
    arms.n_AB = o.n_ab[0];
    const ThresholdResult t = classical_dunnett_threshold(arms, metric.alpha);
    rep["method"] = "dunnett";
    rep["k"] = 1;
    rep["rho"] = t.z_correlation(0, 1);
    add_threshold(rep, t);
    return rep;
  }
  if (o.rho && arm_inputs) fail("--rho", "give either --rho or arm-level inputs, not both");
  if (o.k == 1) {
    double rho;
    if (o.rho) {
      rho = *o.rho;
    } else {
      if (!o.n_a) fail("--n-a", "required unless --rho is given");
      SingleStudyArms arms;
      arms.n_A = *o.n_a;
      arms.n_B = per_substudy(o.n_b, 1, "--n-b", std::nullopt)[0];
      arms.n_AB = per_substudy(o.n_ab, 1, "--n-ab", std::nullopt)[0];
      arms.rho_AB_A = per_substudy(o.rho_ab_a, 1, "--rho-ab-a", 0.0)[0];
      arms.rho_AB_B = per_substudy(o.rho_ab_b, 1, "--rho-ab-b", 0.0)[0];
      arms.rho_A_B = o.rho_a_b;
      rho = test_stat_correlation(arms);
    }
    if (metric.min_rejections() > 2) fail("--m", "at most 2 with two test statistics");
    const ThresholdResult t = generalized_dunnett_threshold(rho, metric);
    rep["method"] = "generalized";
    rep["k"] = 1;
    rep["rho"] = rho;
    add_threshold(rep, t);
    return rep;
  }
  if (o.rho) fail("--rho", "platform mode (--k > 1) needs arm-level inputs");
  if (!o.n_a) fail("--n-a", "required");
  PlatformArms arms;
  arms.K = o.k;
  arms.n_A = *o.n_a;
  arms.n_B = per_substudy(o.n_b, o.k, "--n-b", std::nullopt);
  arms.n_AB = per_substudy(o.n_ab, o.k, "--n-ab", std::nullopt);
  const auto ra = per_substudy(o.rho_ab_a, o.k, "--rho-ab-a", 0.0);
  const auto rb = per_substudy(o.rho_ab_b, o.k, "--rho-ab-b", 0.0);
  for (std::size_t k = 0; k < o.k; ++k) {
    arms.correlations.set(arm_index(k, ArmRole::Combo), control_arm(), ra[k]);
    arms.correlations.set(arm_index(k, ArmRole::Combo), arm_index(k, ArmRole::Mono), rb[k]);
    arms.correlations.set(arm_index(k, ArmRole::Mono), control_arm(), o.rho_a_b);
  }
  const CorrelationMatrix z = platform_z_correlation_matrix(arms);
  if (metric.min_rejections() > z.dim()) fail("--m", "exceeds the number of comparisons 2K");
  const ThresholdResult t = platform_threshold(z, metric, o.precision, seed);
  rep["method"] = "generalized";
  rep["k"] = o.k;
  add_threshold(rep, t);
  rep["seed"] = seed;
  rep["_z_correlation"] = matrix_json(z.matrix());
  return rep;
}

ojson cmd_design(const Options& o, std::uint64_t seed) {
  const std::size_t K = o.k;
  DesignScenario sc;
  sc.K = K;
  sc.delta = per_substudy(o.delta, K, "--delta", std::nullopt);
  sc.synergy = per_substudy(o.synergy, K, "--synergy", 1.0);
  sc.rho_ABk_A = per_substudy(o.rho_ab_a, K, "--rho-ab-a", 0.0);
  sc.rho_ABk_Bk = per_substudy(o.rho_ab_b, K, "--rho-ab-b", 0.0);
  sc.sigma2 = o.sigma2;
  sc.validate();
  if (o.n0 < static_cast<long>(arm_count(K))) fail("--n0", "must be at least 2K+1 = " + std::to_string(arm_count(K)));
  if (o.nsim < 1000) fail("--nsim", "must be at least 1000");
  if (o.max_n < o.n0) fail("--max-n", "must be at least --n0");
  const ErrorMetric metric = make_metric(o);
  if (metric.min_rejections() > 2 * K) fail("--m", "exceeds the number of comparisons 2K");

  Allocation alloc;
  std::string source;
  if (!o.allocation.empty()) {
    if (o.allocation.size() != arm_count(K)) fail("--allocation", "expected 2K+1 ratios");
    alloc.ratios = o.allocation;
    try {
      alloc.validate();
    } catch (const DomainError& e) {
      fail("--allocation", e.what());
    }
    source = "given";
  } else {
    AllocationOptions ao;
    ao.use_closed_form = o.closed_form;
    const AllocationResult r = optimize_allocation_detailed(sc, ao);
    alloc = r.allocation;
    source = r.closed_form ? "closed-form" : "optimized";
  }
  const CorrelationMatrix z = design_z_correlation(sc, alloc);
  const ThresholdResult t = K == 1 ? generalized_dunnett_threshold(z(0, 1), metric)
                                   : platform_threshold(z, metric, o.precision, seed);
  SampleSizeOptions so;
  so.N0 = o.n0;
  so.n_sim = o.nsim;
  so.seed = seed;
  so.max_N = o.max_n;
  const SampleSizeResult n = find_sample_size(sc, alloc, t, o.power, so);

  ojson rep;
  rep["k"] = K;
  rep["allocation"] = alloc.ratios;
  rep["allocation_source"] = source;
  rep["maxmin_objective"] = maxmin_objective(sc, alloc);
  if (K == 1) rep["rho_z"] = z(0, 1);
  add_threshold(rep, t);
  rep["target_power"] = o.power;
  rep["N_star"] = n.N_star;
  rep["N_star_stderr"] = n.N_star_stderr;
  rep["arm_counts"] = n.arm_counts;
  rep["search_power"] = n.search_power;
  rep["achieved_power"] = n.achieved_power;
  rep["per_comparison_power"] = n.detail.per_comparison;
  rep["reject_all"] = n.detail.reject_all;
  rep["reject_any"] = n.detail.reject_any;
  rep["n_sim"] = o.nsim;
  rep["seed"] = seed;
  ojson trace = ojson::array();
  for (const auto& s : n.search_trace) trace.push_back({s.N, s.power});
  rep["_search_trace"] = trace;
  if (K > 1) rep["_z_correlation"] = matrix_json(z.matrix());
  return rep;
}

ojson cmd_estimate(const Options& o, std::uint64_t seed, std::ostream& err) {
  if (o.delimiter.size() != 1) fail("--delimiter", "must be a single character");
  CsvSchema schema;
  schema.delimiter = o.delimiter[0];
  schema.model_column = o.model_column;
  schema.treatment_column = o.treatment_column;
  schema.response_column = o.response_column;
  schema.duplicates = o.duplicates == "mean" ? DuplicatePolicy::Mean : DuplicatePolicy::Error;
  schema.flip_sign = o.flip_sign;
  const PairedEndpointTable table = ingest_csv(o.input, schema);
  if (o.verbose)
    err << "read " << table.rows_read << " rows, " << table.responses.size() << " models, "
        << table.duplicates_merged << " duplicates merged\n";

  std::vector<RoleAssignment> trials;
  if (!o.roles.empty()) {
    if (!o.drug_a.empty() || !o.drug_b.empty() || !o.combo.empty())
      fail("--roles", "give either --roles or --drug-a/--drug-b/--combo");
    trials = read_roles(o.roles, schema.delimiter);
    if (trials.empty()) fail("--roles", "no trials listed");
  } else {
    if (o.drug_a.empty()) fail("--drug-a", "required unless --roles is given");
    if (o.drug_b.empty()) fail("--drug-b", "required unless --roles is given");
    if (o.combo.empty()) fail("--combo", "required unless --roles is given");
    trials.push_back({o.drug_a, o.drug_b, o.combo});
  }
  EstimateOptions eo;
  eo.min_triples = o.min_triples;
  ojson all = ojson::array();
  for (const auto& t : trials) {
    const TrialEstimates est = estimate_trial(table, t.drug_A, t.drug_B, t.combo, eo);
    ojson rep = to_json(est);
    if (o.table1 && !est.screened_out) {
      const Table1Result r = table1_pipeline(est, o.reps, seed);
      rep["rho_z"] = r.rho;
      rep["unadjusted_fwer"] = r.unadjusted.fwer;
      rep["unadjusted_fmer"] = r.unadjusted.fmer;
      rep["unadjusted_msfp"] = r.unadjusted.msfp;
      rep["fwer_p_threshold"] = r.fwer.p_threshold;
      rep["fmer_p_threshold"] = r.fmer.p_threshold;
      rep["msfp_p_threshold"] = r.msfp.p_threshold;
    }
    all.push_back(rep);
  }
  return o.roles.empty() ? all[0] : all;
}

GridSpec simulate_grid(const Options& o, std::uint64_t seed) {
  GridSpec g = o.study == "design-surface" ? default_design_surface_grid() : default_curve_grid();
  g.seed = seed;
  if (o.study == "design-surface") {
    if (!o.synergy.empty()) g.synergy_values = o.synergy;
    if (!o.rho_list.empty()) g.rho_values = o.rho_list;
    if (!o.delta.empty()) g.fixed["delta"] = o.delta[0];
    g.fixed["sigma2"] = o.sigma2;
    g.fixed["power"] = o.power;
    if (o.n0 < 3) fail("--n0", "must be at least 3");
    if (o.nsim < 1000) fail("--nsim", "must be at least 1000");
    g.N0 = o.n0;
    g.n_sim = o.nsim;
    return g;
  }
  if (!o.sweep.empty()) g.sweep = o.sweep;
  if (o.from) g.from = *o.from;
  if (o.to) g.to = *o.to;
  if (o.step) g.step = *o.step;
  if (!o.rho_ab_a.empty()) g.fixed["rho_AB_A"] = o.rho_ab_a[0];
  if (!o.rho_ab_b.empty()) g.fixed["rho_AB_B"] = o.rho_ab_b[0];
  if (o.reps == 0) fail("--reps", "must be positive");
  g.replications = o.reps;
  try {
    g.validate();
  } catch (const DomainError& e) {
    fail("--sweep", e.what());
  }
  return g;
}

ResultTable cmd_simulate(const Options& o, std::uint64_t seed, std::ostream& err) {
  const GridSpec g = simulate_grid(o, seed);
  if (o.study == "error-curves") return run_error_curves(g);
  if (o.study == "adjustments") return run_adjustment_comparison(g);
  if (o.study == "thresholds") return run_threshold_curves(g);
  ProgressFn progress;
  if (o.verbose) progress = [&err](std::size_t done, std::size_t total) { err << "design surface " << done << "/" << total << '\n'; };
  return run_design_surface(g, progress);
}

// ---- config ----

std::string config_token(const ojson& v, const std::string& key) {
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  throw DomainError("--config: key '" + key + "' has an unsupported value " + v.dump());
}

bool given(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

// --config value from the raw tokens, before the real parse (which may need
// required options that only the config file supplies).
std::optional<std::string> find_config(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

// Appends config values as flags for every option not given on the command line.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& path, CLI::App& app) {
  std::ifstream in(path);
  if (!in) throw DomainError("--config: cannot open '" + path + "'");
  ojson cfg;
  try {
    cfg = ojson::parse(in);
  } catch (const std::exception& e) {
    throw DomainError("--config: cannot parse '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw DomainError("--config: top level must be a JSON object");
  CLI::App* active = nullptr;
  for (const auto& a : args)
    if (auto* sub = app.get_subcommand_no_throw(a)) {
      active = sub;
      break;
    }
  std::vector<std::string> merged = args;
  std::vector<std::string> global_tokens;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (key == "config") throw DomainError("--config: nested config files are not supported");
    const bool is_global = app.get_option_no_throw(flag) != nullptr;
    if (!is_global && !(active && active->get_option_no_throw(flag)))
      throw DomainError("--config: unknown key '" + key + "'");
    if (given(args, flag)) continue;  // flag given explicitly wins
    std::vector<std::string> tokens;
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back(flag);
    } else if (value.is_array()) {
      if (!value.empty()) tokens.push_back(flag);
      for (const auto& x : value) tokens.push_back(config_token(x, key));
    } else {
      tokens.push_back(flag);
      tokens.push_back(config_token(value, key));
    }
    auto& dest = is_global ? global_tokens : merged;
    dest.insert(dest.end(), tokens.begin(), tokens.end());
  }
  // global options go in front of the subcommand
  merged.insert(merged.begin(), global_tokens.begin(), global_tokens.end());
  return merged;
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation:
      return kExitValidation;
    case ErrorCategory::Numeric:
      return kExitNumeric;
    case ErrorCategory::Budget:
      return kExitBudget;
  }
  return kExitNumeric;
}

int parse(CLI::App& app, std::vector<std::string> args, std::ostream& out, std::ostream& err, bool& done) {
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    done = true;
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    done = true;
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    done = true;
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    Options o;
    CLI::App app{"Design engine for platform trials of combination therapies", "comboplat"};
    CLI::App *adjust, *design, *estimate, *simulate;
    build_app(app, o, adjust, design, estimate, simulate);
    std::vector<std::string> tokens = args;
    if (const auto cfg = find_config(args)) tokens = merge_config(args, *cfg, app);
    bool done = false;
    const int rc = parse(app, tokens, out, err, done);
    if (done) return rc;

    const std::uint64_t seed = resolve_seed(o);
    std::ofstream file;
    if (!o.out.empty()) {
      file.open(o.out, std::ios::binary);
      if (!file) throw DomainError("--out: cannot open '" + o.out + "' for writing");
    }
    std::ostream& dest = o.out.empty() ? out : file;

    if (simulate->parsed()) {
      const ResultTable t = cmd_simulate(o, seed, err);
      if (o.format == "json")
        t.write_jsonl(dest);
      else
        t.write_csv(dest);
      std::ostream& note = o.out.empty() ? err : out;
      note << "study " << o.study << ": " << t.size() << " rows" << (o.out.empty() ? "" : " written to " + o.out)
           << '\n';
      return kExitOk;
    }
    ojson rep;
    if (adjust->parsed())
      rep = cmd_adjust(o, seed);
    else if (design->parsed())
      rep = cmd_design(o, seed);
    else
      rep = cmd_estimate(o, seed, err);
    render(rep, o.format, dest);
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace comboplat

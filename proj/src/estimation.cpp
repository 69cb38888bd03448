#include "comboplat/estimation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "comboplat/correlation.hpp"
#include "comboplat/errors.hpp"
#include "comboplat/normal.hpp"

namespace comboplat {

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Splits one CSV record; double quotes protect delimiters, "" is a literal quote.
std::vector<std::string> split_record(const std::string& line, char delim, std::size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = was_quoted = true;
    } else if (ch == delim) {
      out.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field on line " + std::to_string(line_no), line_no);
  out.push_back(was_quoted ? cur : trim(cur));
  return out;
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw SchemaError("missing required column '" + name + "'", name);
  return static_cast<std::size_t>(it - header.begin());
}

double parse_number(const std::string& text, std::size_t line_no) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  if (!text.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (text.empty() || ec != std::errc() || ptr != e || !std::isfinite(v))
    throw ParseError("line " + std::to_string(line_no) + ": response '" + text + "' is not a finite number", line_no);
  return v;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sd_of(const std::vector<double>& x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y, const std::string& what) {
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw ZeroVariance("constant responses among paired models for " + what);
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

std::vector<double> PairedEndpointTable::arm(const std::string& treatment) const {
  std::vector<double> out;
  for (const auto& [model, by_treatment] : responses) {
    auto it = by_treatment.find(treatment);
    if (it != by_treatment.end()) out.push_back(it->second);
  }
  return out;
}

std::size_t PairedEndpointTable::complete_models(const std::vector<std::string>& treatments) const {
  std::size_t n = 0;
  for (const auto& [model, by_treatment] : responses)
    n += std::all_of(treatments.begin(), treatments.end(), [&](const auto& t) { return by_treatment.count(t) > 0; });
  return n;
}

PairedEndpointTable parse_endpoint_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_record(line, schema.delimiter, line_no);
  }
  if (header.empty()) throw ParseError("input has no header row", 0);
  const std::size_t c_model = find_column(header, schema.model_column);
  const std::size_t c_treat = find_column(header, schema.treatment_column);
  const std::size_t c_resp = find_column(header, schema.response_column);

  struct Cell {
    double sum = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> lines;
  };
  std::map<std::pair<std::string, std::string>, Cell> cells;
  PairedEndpointTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_record(line, schema.delimiter, line_no);
    if (f.size() != header.size()) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << header.size() << " fields, found " << f.size();
      throw ParseError(msg.str(), line_no);
    }
    if (f[c_model].empty() || f[c_treat].empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty model or treatment", line_no);
    double v = parse_number(f[c_resp], line_no);
    if (schema.flip_sign) v = -v;
    Cell& cell = cells[{f[c_model], f[c_treat]}];
    cell.sum += v;
    ++cell.count;
    cell.lines.push_back(line_no);
    ++table.rows_read;
  }

  std::ostringstream dups;
  std::size_t first_dup_line = 0, dup_count = 0;
  for (const auto& [key, cell] : cells) {
    if (cell.count > 1) {
      ++dup_count;
      table.duplicates_merged += cell.count - 1;
      if (first_dup_line == 0 || cell.lines.front() < first_dup_line) first_dup_line = cell.lines.front();
      dups << "\n  (" << key.first << ", " << key.second << ") on lines";
      for (auto l : cell.lines) dups << ' ' << l;
    }
    table.responses[key.first][key.second] = cell.sum / static_cast<double>(cell.count);
  }
  if (dup_count > 0 && schema.duplicates == DuplicatePolicy::Error)
    throw ParseError(std::to_string(dup_count) + " duplicate (model, treatment) pairs:" + dups.str(), first_dup_line);
  return table;
}

PairedEndpointTable ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return parse_endpoint_csv(in, schema);
}

double pooled_sd(double sd1, long n1, double sd2, long n2) {
  if (n1 < 1 || n2 < 1 || n1 + n2 < 3) throw DomainError("pooled_sd: need n1, n2 >= 1 and n1 + n2 >= 3");
  if (!(sd1 >= 0.0) || !(sd2 >= 0.0)) throw DomainError("pooled_sd: standard deviations must be non-negative");
  return std::sqrt((static_cast<double>(n1 - 1) * sd1 * sd1 + static_cast<double>(n2 - 1) * sd2 * sd2) /
                   static_cast<double>(n1 + n2 - 2));
}

TrialEstimates estimate_trial(const PairedEndpointTable& table, const std::string& drug_A, const std::string& drug_B,
                              const std::string& combo, const EstimateOptions& options) {
  const std::size_t triples = table.complete_models({drug_A, drug_B, combo});
  if (triples < std::max<std::size_t>(options.min_triples, 3)) {
    std::ostringstream msg;
    msg << "only " << triples << " models have responses for all of (" << drug_A << ", " << drug_B << ", " << combo
        << "); need " << std::max<std::size_t>(options.min_triples, 3);
    throw InsufficientData(msg.str());
  }
  TrialEstimates est;
  est.drug_A = drug_A;
  est.drug_B = drug_B;
  est.combo = combo;

  const auto ya = table.arm(drug_A), yb = table.arm(drug_B), yab = table.arm(combo);
  est.n_A = static_cast<long>(ya.size());
  est.n_B = static_cast<long>(yb.size());
  est.n_AB = static_cast<long>(yab.size());
  const double sd_a = sd_of(ya), sd_b = sd_of(yb), sd_ab = sd_of(yab);
  for (auto [sd, name] : {std::pair{sd_a, &drug_A}, std::pair{sd_b, &drug_B}, std::pair{sd_ab, &combo}})
    if (!(sd > 0.0)) throw ZeroVariance("responses for '" + *name + "' are constant");

  auto paired = [&](const std::string& t1, const std::string& t2) {
    std::vector<double> x, y;
    for (const auto& [model, r] : table.responses) {
      auto i = r.find(t1), j = r.find(t2);
      if (i != r.end() && j != r.end()) {
        x.push_back(i->second);
        y.push_back(j->second);
      }
    }
    return pearson(x, y, t1 + " / " + t2);
  };
  est.rho_AB_A = paired(combo, drug_A);
  est.rho_AB_B = paired(combo, drug_B);

  const double mean_a = mean_of(ya);
  est.delta_AB = (mean_of(yab) - mean_a) / pooled_sd(sd_ab, est.n_AB, sd_a, est.n_A);
  est.delta_B = (mean_of(yb) - mean_a) / pooled_sd(sd_a, est.n_A, sd_b, est.n_B);
  est.s_hat = est.delta_B != 0.0 ? est.delta_AB / est.delta_B : std::numeric_limits<double>::quiet_NaN();
  est.screened_out = !(est.delta_AB > 0.0) || !(est.delta_B > 0.0);
  return est;
}

nlohmann::ordered_json to_json(const TrialEstimates& est) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  return nlohmann::ordered_json{{"rho_AB_A", num(est.rho_AB_A)},
                        {"rho_AB_B", num(est.rho_AB_B)},
                        {"delta_B", num(est.delta_B)},
                        {"delta_AB", num(est.delta_AB)},
                        {"s_hat", num(est.s_hat)},
                        {"n_A", est.n_A},
                        {"n_B", est.n_B},
                        {"n_AB", est.n_AB},
                        {"drug_A", est.drug_A},
                        {"drug_B", est.drug_B},
                        {"combo", est.combo},
                        {"screened_out", est.screened_out}};
}

std::vector<RoleAssignment> read_roles(const std::string& path, char delimiter) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open roles file '" + path + "'", 0);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  std::vector<RoleAssignment> out;
  std::size_t ca = 0, cb = 0, cc = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = split_record(line, delimiter, line_no);
    if (header.empty()) {
      header = f;
      ca = find_column(header, "drug_A");
      cb = find_column(header, "drug_B");
      cc = find_column(header, "combo");
      continue;
    }
    if (f.size() != header.size())
      throw ParseError("roles line " + std::to_string(line_no) + ": wrong number of fields", line_no);
    out.push_back({f[ca], f[cb], f[cc]});
  }
  if (header.empty()) throw ParseError("roles file has no header row", 0);
  return out;
}

Table1Result table1_from_rho(double rho, std::size_t replications, std::uint64_t seed) {
  Table1Result r;
  r.rho = rho;
  r.unadjusted = empirical_error_rates(CorrelationMatrix::bivariate(rho), std_normal_quantile(0.975), replications, seed);
  r.fwer = generalized_dunnett_threshold(rho, ErrorMetric::fwer(0.05));
  r.fmer = generalized_dunnett_threshold(rho, ErrorMetric::fmer(0.0025));
  r.msfp = generalized_dunnett_threshold(rho, ErrorMetric::msfp(0.000625));
  return r;
}

Table1Result table1_pipeline(const TrialEstimates& est, std::size_t replications, std::uint64_t seed) {
  if (est.screened_out) throw DomainError("table1_pipeline: trial " + est.combo + " is screened out");
  SingleStudyArms arms;
  arms.n_A = static_cast<double>(est.n_A);
  arms.n_B = static_cast<double>(est.n_B);
  arms.n_AB = static_cast<double>(est.n_AB);
  arms.rho_AB_A = est.rho_AB_A;
  arms.rho_AB_B = est.rho_AB_B;
  return table1_from_rho(test_stat_correlation(arms), replications, seed);
}

}  // namespace comboplat

#include "comboplat/multiplicity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "comboplat/errors.hpp"
#include "comboplat/normal.hpp"
#include "comboplat/random.hpp"
#include "comboplat/rectangle.hpp"

namespace comboplat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Draw cap for the simulated m-FWER threshold.
constexpr std::size_t kMaxThresholdDraws = 50'000'000;

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    std::ostringstream msg;
    msg << "alpha must lie in (0, 1), got " << alpha;
    throw DomainError(msg.str());
  }
}

ThresholdResult make_result(double c, const ErrorMetric& metric, CorrelationMatrix corr, double level, double se) {
  ThresholdResult r;
  r.critical_value = c;
  r.p_threshold = two_sided_p(c);
  r.metric = metric;
  r.z_correlation = std::move(corr);
  r.achieved_level = level;
  r.achieved_std_error = se;
  return r;
}

}  // namespace

std::size_t ErrorMetric::min_rejections() const {
  switch (kind) {
    case MetricKind::FWER:
      return 1;
    case MetricKind::FMER:
    case MetricKind::MSFP:
      return 2;
    case MetricKind::mFWER:
      return m;
  }
  return 1;
}

Sidedness ErrorMetric::tail() const {
  switch (kind) {
    case MetricKind::FWER:
    case MetricKind::FMER:
      return Sidedness::TwoSided;
    case MetricKind::MSFP:
      return Sidedness::Upper;
    case MetricKind::mFWER:
      return sidedness;
  }
  return Sidedness::TwoSided;
}

void ErrorMetric::validate() const {
  check_alpha(alpha);
  if (kind == MetricKind::mFWER && m < 1) throw DomainError("mFWER needs m >= 1");
}

std::string ErrorMetric::name() const {
  switch (kind) {
    case MetricKind::FWER:
      return "FWER";
    case MetricKind::FMER:
      return "FMER";
    case MetricKind::MSFP:
      return "MSFP";
    case MetricKind::mFWER:
      return "mFWER(m=" + std::to_string(m) + (sidedness == Sidedness::Upper ? ",upper)" : ")");
  }
  return "?";
}

double bonferroni_threshold(std::size_t num_tests, double alpha) {
  if (num_tests == 0) throw DomainError("bonferroni_threshold: need at least one test");
  return alpha / static_cast<double>(num_tests);
}

std::vector<bool> holm_reject(std::span<const double> p_values, double alpha) {
  const std::size_t n = p_values.size();
  for (double p : p_values)
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("holm_reject: p-values must lie in [0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<bool> reject(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (p_values[order[i]] > alpha / static_cast<double>(n - i)) break;
    reject[order[i]] = true;
  }
  return reject;
}

double null_error_probability(double c, double rho, const ErrorMetric& metric) {
  const std::size_t m = metric.min_rejections();
  const bool upper = metric.tail() == Sidedness::Upper;
  if (m == 1)
    return upper ? 1.0 - bvn_rectangle({-kInf, -kInf}, {c, c}, rho) : 1.0 - bvn_rectangle({-c, -c}, {c, c}, rho);
  if (m == 2) return upper ? bvn_upper(c, c, rho) : 2.0 * (bvn_upper(c, c, rho) + bvn_upper(c, c, -rho));
  throw DomainError("null_error_probability: two statistics allow at most m = 2");
}

double solve_critical_value(const std::function<double(double)>& prob, double target, double lo, double hi) {
  double f_lo = prob(lo) - target;
  double f_hi = prob(hi) - target;
  if (f_lo < 0.0 || f_hi > 0.0) {
    std::ostringstream msg;
    msg << "no critical value in [" << lo << ", " << hi << "] reaches level " << target << " (level spans "
        << f_hi + target << " .. " << f_lo + target << ")";
    throw RootBracketError(msg.str());
  }
  for (int it = 0; it < 200 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (prob(mid) - target > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

ThresholdResult generalized_dunnett_threshold(double rho, const ErrorMetric& metric) {
  metric.validate();
  if (!(std::fabs(rho) <= 1.0)) throw DomainError("generalized_dunnett_threshold: |rho| must be <= 1");
  if (metric.min_rejections() > 2) throw DomainError("generalized_dunnett_threshold: two statistics allow m <= 2");
  auto prob = [&](double c) { return null_error_probability(c, rho, metric); };
  const double c = solve_critical_value(prob, metric.alpha);
  return make_result(c, metric, CorrelationMatrix::bivariate(rho), prob(c), 0.0);
}

ThresholdResult classical_dunnett_threshold(const SingleStudyArms& arms, double alpha) {
  return generalized_dunnett_threshold(classical_dunnett_correlation(arms), ErrorMetric::fwer(alpha));
}

namespace {

ThresholdResult rectangle_fwer_threshold(const CorrelationMatrix& z_corr, const ErrorMetric& metric, double precision,
                                         std::uint64_t seed) {
  const std::size_t d = z_corr.dim();
  auto spec_at = [&](double c) {
    return RectangleSpec{std::vector<double>(d, -c), std::vector<double>(d, c), z_corr};
  };
  // Size the lattice at the independence guess, then root-find on a fixed
  // point set so the objective is smooth in c.
  double c = std_normal_quantile(0.5 * (1.0 + std::pow(1.0 - metric.alpha, 1.0 / static_cast<double>(d))));
  std::size_t points = mvn_rectangle(spec_at(c), precision, seed).points_per_shift;
  for (int attempt = 0;; ++attempt) {
    auto prob = [&](double x) {
      if (x <= 0.0) return 1.0;
      return 1.0 - mvn_rectangle_fixed(spec_at(x), points, seed).probability;
    };
    c = solve_critical_value(prob, metric.alpha);
    const RectangleEstimate at = mvn_rectangle_fixed(spec_at(c), points, seed);
    if (at.std_error <= precision || attempt >= 3)
      return make_result(c, metric, z_corr, 1.0 - at.probability, at.std_error);
    points = mvn_rectangle(spec_at(c), precision, seed).points_per_shift;
  }
}

// m-th largest of |Z| (or Z) per draw; P(at least m rejections at c) = P(T > c).
std::vector<double> order_statistic_draws(const CorrelationMatrix& z_corr, std::size_t m, bool upper,
                                          std::size_t draws, std::uint64_t seed) {
  const std::size_t d = z_corr.dim();
  const Matrix& l = z_corr.factor().lower;
  std::vector<double> t(draws);
  parallel_for(chunk_count(draws), [&](std::size_t chunk) {
    const std::size_t begin = chunk * kRowsPerStream;
    const std::size_t rows = std::min(draws, begin + kRowsPerStream) - begin;
    std::vector<double> z(rows * d), x(d);
    fill_normal_chunk(seed, chunk, rows, d, z.data());
    for (std::size_t r = 0; r < rows; ++r) {
      const double* zr = z.data() + r * d;
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * zr[k];
        x[i] = upper ? s : std::fabs(s);
      }
      std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m - 1), x.end(), std::greater<>());
      t[begin + r] = x[m - 1];
    }
  });
  return t;
}

ThresholdResult simulated_threshold(const CorrelationMatrix& z_corr, const ErrorMetric& metric, double precision,
                                    std::uint64_t seed) {
  const double a = metric.alpha;
  const double needed = std::ceil(a * (1.0 - a) / (precision * precision));
  if (needed > static_cast<double>(kMaxThresholdDraws)) {
    std::ostringstream msg;
    msg << "platform_threshold: precision " << precision << " needs " << needed << " draws, cap is "
        << kMaxThresholdDraws;
    throw PrecisionUnreachable(msg.str());
  }
  const std::size_t draws = std::max<std::size_t>(100'000, static_cast<std::size_t>(needed));
  std::vector<double> t =
      order_statistic_draws(z_corr, metric.min_rejections(), metric.tail() == Sidedness::Upper, draws, seed);
  std::sort(t.begin(), t.end());
  const double n = static_cast<double>(draws);
  auto prob = [&](double c) {
    const auto above = t.end() - std::upper_bound(t.begin(), t.end(), c);
    return static_cast<double>(above) / n;
  };
  const double c = solve_critical_value(prob, a);
  const double level = prob(c);
  return make_result(c, metric, z_corr, level, std::sqrt(std::max(level * (1.0 - level), a * (1.0 - a)) / n));
}

}  // namespace

ThresholdResult platform_threshold(const CorrelationMatrix& z_corr, const ErrorMetric& metric, double precision,
                                   std::uint64_t seed) {
  metric.validate();
  if (!(precision > 0.0)) throw DomainError("platform_threshold: precision must be positive");
  const std::size_t m = metric.min_rejections();
  if (m > z_corr.dim()) {
    std::ostringstream msg;
    msg << "platform_threshold: m = " << m << " exceeds the number of statistics (" << z_corr.dim() << ")";
    throw DomainError(msg.str());
  }
  if (m == 1 && metric.tail() == Sidedness::TwoSided) return rectangle_fwer_threshold(z_corr, metric, precision, seed);
  if (z_corr.dim() == 2) {
    ThresholdResult r = generalized_dunnett_threshold(z_corr(0, 1), metric);
    r.z_correlation = z_corr;
    return r;
  }
  return simulated_threshold(z_corr, metric, precision, seed);
}

double ErrorRates::std_error(double rate) const {
  if (replications == 0) return 0.0;
  return std::sqrt(rate * (1.0 - rate) / static_cast<double>(replications));
}

ErrorRates empirical_error_rates_with(const CorrelationMatrix& z_corr, std::size_t replications, std::uint64_t seed,
                                      const std::function<void(std::span<const double>, std::vector<bool>&)>& decide) {
  if (replications == 0) throw DomainError("empirical_error_rates: need at least one replication");
  const std::size_t d = z_corr.dim();
  const Matrix& l = z_corr.factor().lower;
  const std::size_t chunks = chunk_count(replications);
  std::vector<std::array<std::size_t, 3>> counts(chunks, {0, 0, 0});
  parallel_for(chunks, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kRowsPerStream;
    const std::size_t rows = std::min(replications, begin + kRowsPerStream) - begin;
    std::vector<double> z(rows * d), x(d);
    std::vector<bool> reject(d);
    fill_normal_chunk(seed, chunk, rows, d, z.data());
    auto& c = counts[chunk];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* zr = z.data() + r * d;
      for (std::size_t i = 0; i < d; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= i; ++k) s += l(i, k) * zr[k];
        x[i] = s;
      }
      std::fill(reject.begin(), reject.end(), false);
      decide(x, reject);
      std::size_t any = 0, up = 0;
      for (std::size_t i = 0; i < d; ++i) {
        any += reject[i];
        up += reject[i] && x[i] > 0.0;
      }
      c[0] += any >= 1;
      c[1] += any >= 2;
      c[2] += up >= 2;
    }
  });
  std::array<std::size_t, 3> total{0, 0, 0};
  for (const auto& c : counts)
    for (int i = 0; i < 3; ++i) total[i] += c[i];
  const double n = static_cast<double>(replications);
  return ErrorRates{static_cast<double>(total[0]) / n, static_cast<double>(total[1]) / n,
                    static_cast<double>(total[2]) / n, replications};
}

ErrorRates empirical_error_rates(const CorrelationMatrix& z_corr, double critical_value, std::size_t replications,
                                 std::uint64_t seed) {
  return empirical_error_rates_with(z_corr, replications, seed, [critical_value](std::span<const double> z, std::vector<bool>& rej) {
    for (std::size_t i = 0; i < z.size(); ++i) rej[i] = std::fabs(z[i]) > critical_value;
  });
}

}  // namespace comboplat

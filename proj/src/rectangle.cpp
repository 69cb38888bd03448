#include "comboplat/rectangle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "comboplat/errors.hpp"
#include "comboplat/normal.hpp"
#include "comboplat/random.hpp"

namespace comboplat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Gauss-Legendre half-rules (6, 12 and 20 points) used by the bivariate routine.
constexpr double kW6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
constexpr double kX6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
constexpr double kW12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                           0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
constexpr double kX12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                           0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
constexpr double kW20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                           0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                           0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                           0.1527533871307259};
constexpr double kX20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                           0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                           0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                           0.07652652113349733};

}  // namespace

double bvn_upper(double h, double k, double rho) {
  if (h == kInf || k == kInf) return 0.0;
  if (h == -kInf) return k == -kInf ? 1.0 : std_normal_sf(k);
  if (k == -kInf) return std_normal_sf(h);

  const double* w;
  const double* x;
  int lg;
  const double ar = std::fabs(rho);
  if (ar < 0.3) {
    w = kW6, x = kX6, lg = 3;
  } else if (ar < 0.75) {
    w = kW12, x = kX12, lg = 6;
  } else {
    w = kW20, x = kX20, lg = 10;
  }

  double hk = h * k;
  double bvn = 0.0;
  if (ar < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(rho);
    for (int i = 0; i < lg; ++i) {
      double sn = std::sin(asr * (1.0 - x[i]) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      sn = std::sin(asr * (1.0 + x[i]) / 2.0);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / (4.0 * std::numbers::pi) + std_normal_sf(h) * std_normal_sf(k);
  } else {
    if (rho < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (ar < 1.0) {
      const double twopi = 2.0 * std::numbers::pi;
      const double as = (1.0 - rho) * (1.0 + rho);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 16.0;
      double asr = -(bs / as + hk) / 2.0;
      if (asr > -100.0)
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(twopi) * std_normal_cdf(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
      }
      a /= 2.0;
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double xs = (a + a * is * x[i]) * (a + a * is * x[i]);
          const double rs = std::sqrt(1.0 - xs);
          asr = -(bs / xs + hk) / 2.0;
          if (asr > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + d * xs);
            const double ep = std::exp(-hk * xs / (2.0 * (1.0 + rs) * (1.0 + rs))) / rs;
            bvn += a * w[i] * std::exp(asr) * (ep - sp);
          }
        }
      }
      bvn = -bvn / twopi;
    }
    if (rho > 0.0) {
      bvn += std_normal_sf(std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double span = h < 0.0 ? std_normal_cdf(k) - std_normal_cdf(h) : std_normal_sf(h) - std_normal_sf(k);
      bvn = span - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

double bvn_rectangle(std::array<double, 2> lower, std::array<double, 2> upper, double rho) {
  if (!(std::fabs(rho) <= 1.0)) {
    std::ostringstream msg;
    msg << "bvn_rectangle: |rho| must be <= 1, got " << rho;
    throw DomainError(msg.str());
  }
  for (int i = 0; i < 2; ++i)
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
      throw DomainError("bvn_rectangle: require lower <= upper");
  const double p = bvn_upper(lower[0], lower[1], rho) - bvn_upper(lower[0], upper[1], rho) -
                   bvn_upper(upper[0], lower[1], rho) + bvn_upper(upper[0], upper[1], rho);
  return std::clamp(p, 0.0, 1.0);
}

void RectangleSpec::validate() const {
  const std::size_t n = correlation.dim();
  if (lower.size() != n || upper.size() != n)
    throw DomainError("RectangleSpec: limit vectors must match the correlation dimension");
  for (std::size_t i = 0; i < n; ++i)
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || !(lower[i] < upper[i]))
      throw DomainError("RectangleSpec: require lower[i] < upper[i]");
}

namespace {

// Problem after dropping unbounded coordinates and reordering; `lower` is the
// prioritized Cholesky factor.
struct Prepared {
  std::size_t dim = 0;
  Matrix chol;
  std::vector<double> a;
  std::vector<double> b;
};

double truncated_mean(double ta, double tb) {
  const double mass = std_normal_cdf(tb) - std_normal_cdf(ta);
  if (mass > 1e-300) return (std_normal_pdf(ta) - std_normal_pdf(tb)) / mass;
  if (ta == -kInf) return tb;
  if (tb == kInf) return ta;
  return 0.5 * (ta + tb);
}

Prepared prepare(const RectangleSpec& spec) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < spec.correlation.dim(); ++i)
    if (!(spec.lower[i] == -kInf && spec.upper[i] == kInf)) keep.push_back(i);

  Prepared p;
  p.dim = keep.size();
  const std::size_t n = p.dim;
  Matrix cov(n, n);
  const double jitter = spec.correlation.factor().jitter;
  for (std::size_t i = 0; i < n; ++i) {
    p.a.push_back(spec.lower[keep[i]]);
    p.b.push_back(spec.upper[keep[i]]);
    for (std::size_t j = 0; j < n; ++j) cov(i, j) = spec.correlation(keep[i], keep[j]);
    cov(i, i) += jitter;
  }

  constexpr double kPivotFloor = 1e-14;
  p.chol = Matrix(n, n);
  Matrix& l = p.chol;
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    // Pick the remaining coordinate with the smallest conditional interval mass.
    std::size_t best = i;
    double best_mass = kInf;
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0, v = cov(j, j);
      for (std::size_t k = 0; k < i; ++k) {
        s += l(j, k) * y[k];
        v -= l(j, k) * l(j, k);
      }
      const double den = std::sqrt(std::max(v, kPivotFloor));
      const double mass = std_normal_cdf((p.b[j] - s) / den) - std_normal_cdf((p.a[j] - s) / den);
      if (mass < best_mass) {
        best_mass = mass;
        best = j;
      }
    }
    if (best != i) {
      std::swap(p.a[i], p.a[best]);
      std::swap(p.b[i], p.b[best]);
      for (std::size_t k = 0; k < n; ++k) std::swap(cov(i, k), cov(best, k));
      for (std::size_t k = 0; k < n; ++k) std::swap(cov(k, i), cov(k, best));
      for (std::size_t k = 0; k < i; ++k) std::swap(l(i, k), l(best, k));
    }
    double v = cov(i, i);
    for (std::size_t k = 0; k < i; ++k) v -= l(i, k) * l(i, k);
    l(i, i) = std::sqrt(std::max(v, kPivotFloor));
    for (std::size_t m = i + 1; m < n; ++m) {
      double s = cov(m, i);
      for (std::size_t k = 0; k < i; ++k) s -= l(m, k) * l(i, k);
      l(m, i) = s / l(i, i);
    }
    double s = 0.0;
    for (std::size_t k = 0; k < i; ++k) s += l(i, k) * y[k];
    y[i] = truncated_mean((p.a[i] - s) / l(i, i), (p.b[i] - s) / l(i, i));
  }
  return p;
}

// Integrand of the separation-of-variables transform at w in [0,1]^(dim-1).
double integrand(const Prepared& p, const double* w, std::vector<double>& y) {
  const Matrix& l = p.chol;
  double d = std_normal_cdf(p.a[0] / l(0, 0));
  double e = std_normal_cdf(p.b[0] / l(0, 0));
  double f = e - d;
  constexpr double kLo = std::numeric_limits<double>::min();
  constexpr double kHi = 1.0 - 0x1.0p-53;
  for (std::size_t i = 1; i < p.dim && f > 0.0; ++i) {
    y[i - 1] = std_normal_quantile(std::clamp(d + w[i - 1] * (e - d), kLo, kHi));
    double s = 0.0;
    for (std::size_t k = 0; k < i; ++k) s += l(i, k) * y[k];
    d = std_normal_cdf((p.a[i] - s) / l(i, i));
    e = std_normal_cdf((p.b[i] - s) / l(i, i));
    f *= e - d;
  }
  return f > 0.0 ? f : 0.0;
}

const std::vector<double>& lattice_generator(std::size_t dims) {
  static const std::vector<double> gen = [] {
    std::vector<double> out;
    for (unsigned cand = 2; out.size() < 200; ++cand) {
      bool prime = true;
      for (unsigned d = 2; d * d <= cand; ++d)
        if (cand % d == 0) {
          prime = false;
          break;
        }
      if (prime) {
        const double r = std::sqrt(static_cast<double>(cand));
        out.push_back(r - std::floor(r));
      }
    }
    return out;
  }();
  if (dims > gen.size()) throw DomainError("mvn_rectangle: dimension too large for the lattice generator");
  return gen;
}

RectangleEstimate run_lattice(const Prepared& p, std::size_t points, std::uint64_t seed, std::size_t shifts) {
  RectangleEstimate est;
  est.points_per_shift = points;
  if (p.dim == 0) {
    est.probability = 1.0;
    return est;
  }
  if (p.dim == 1) {
    est.probability = std::max(0.0, std_normal_cdf(p.b[0] / p.chol(0, 0)) - std_normal_cdf(p.a[0] / p.chol(0, 0)));
    est.evaluations = 1;
    return est;
  }
  const std::size_t m = p.dim - 1;
  const auto& gen = lattice_generator(m);
  std::vector<double> shift_means(shifts, 0.0);
  parallel_for(shifts, [&](std::size_t r) {
    NormalStream stream(seed, r);
    std::vector<double> x(m), w(m), wa(m), y(p.dim);
    for (std::size_t j = 0; j < m; ++j) x[j] = stream.uniform();
    double sum = 0.0;
    for (std::size_t k = 0; k < points; ++k) {
      for (std::size_t j = 0; j < m; ++j) {
        x[j] += gen[j];
        if (x[j] >= 1.0) x[j] -= 1.0;
        w[j] = std::fabs(2.0 * x[j] - 1.0);  // baker's transform
        wa[j] = 1.0 - w[j];
      }
      sum += 0.5 * (integrand(p, w.data(), y) + integrand(p, wa.data(), y));
    }
    shift_means[r] = sum / static_cast<double>(points);
  });
  double mean = 0.0;
  for (double v : shift_means) mean += v;
  mean /= static_cast<double>(shifts);
  double ss = 0.0;
  for (double v : shift_means) ss += (v - mean) * (v - mean);
  est.probability = std::clamp(mean, 0.0, 1.0);
  est.std_error = shifts > 1 ? std::sqrt(ss / static_cast<double>(shifts * (shifts - 1))) : 0.0;
  est.evaluations = 2 * points * shifts;
  return est;
}

}  // namespace

RectangleEstimate mvn_rectangle_fixed(const RectangleSpec& spec, std::size_t points_per_shift, std::uint64_t seed,
                                      std::size_t shifts) {
  spec.validate();
  if (points_per_shift == 0 || shifts == 0) throw DomainError("mvn_rectangle_fixed: need points and shifts");
  return run_lattice(prepare(spec), points_per_shift, seed, shifts);
}

RectangleEstimate mvn_rectangle(const RectangleSpec& spec, double precision, std::uint64_t seed,
                                const MvnOptions& options) {
  spec.validate();
  if (!(precision > 0.0)) throw DomainError("mvn_rectangle: precision must be positive");
  if (options.shifts < 2) throw DomainError("mvn_rectangle: need at least two random shifts");
  const Prepared p = prepare(spec);
  std::size_t points = std::max<std::size_t>(options.initial_points, 1);
  std::size_t spent = 0;
  while (true) {
    const std::size_t cost = 2 * points * options.shifts;
    if (spent + cost > options.max_evaluations) {
      std::ostringstream msg;
      msg << "mvn_rectangle: precision " << precision << " not reached within " << options.max_evaluations
          << " integrand evaluations";
      throw PrecisionUnreachable(msg.str());
    }
    RectangleEstimate est = run_lattice(p, points, seed, options.shifts);
    spent += est.evaluations;
    if (est.std_error <= precision) {
      est.evaluations = spent;
      return est;
    }
    points *= 2;
  }
}

}  // namespace comboplat

#include <doctest.h>

#include <cmath>
#include <random>

#include "comboplat/errors.hpp"
#include "comboplat/linalg.hpp"
#include "comboplat/normal.hpp"
#include "comboplat/random.hpp"
#include "comboplat/rectangle.hpp"
#include "oracles.hpp"

using namespace comboplat;

TEST_SUITE("numeric_core") {
  TEST_CASE("normal cdf and tail agree with 50-digit erfc") {
    for (double x = -9.0; x <= 9.0; x += 0.37) {
      const double ref = oracle::Phi(x);
      CHECK(std_normal_cdf(x) == doctest::Approx(ref).epsilon(1e-13));
      CHECK(std_normal_sf(x) == doctest::Approx(oracle::Phi(-x)).epsilon(1e-13));
    }
    CHECK(std_normal_cdf(oracle::inf()) == 1.0);
    CHECK(std_normal_cdf(-oracle::inf()) == 0.0);
    CHECK(std_normal_pdf(0.3) == doctest::Approx(oracle::phi(0.3)).epsilon(1e-14));
  }

  TEST_CASE("quantile inverts the cdf") {
    for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999999}) {
      const double q = std_normal_quantile(p);
      CHECK(q == doctest::Approx(oracle::Phi_inv(p)).epsilon(1e-12));
    }
    CHECK(std_normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-14));
    CHECK_THROWS_AS(std_normal_quantile(0.0), DomainError);
    CHECK_THROWS_AS(std_normal_quantile(1.0), DomainError);
    CHECK_THROWS_AS(std_normal_quantile(std::nan("")), DomainError);
    CHECK(two_sided_p(1.959963984540054) == doctest::Approx(0.05).epsilon(1e-12));
  }

  TEST_CASE("bivariate rectangle matches quadrature") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> lim(-3.0, 3.0), r(-0.99, 0.99);
    for (int i = 0; i < 60; ++i) {
      double l1 = lim(gen), u1 = lim(gen), l2 = lim(gen), u2 = lim(gen);
      if (l1 > u1) std::swap(l1, u1);
      if (l2 > u2) std::swap(l2, u2);
      const double rho = r(gen);
      CHECK(std::abs(bvn_rectangle({l1, l2}, {u1, u2}, rho) - oracle::bvn_rect(l1, u1, l2, u2, rho)) < 1e-9);
      CHECK(std::abs(bvn_upper(l1, l2, rho) - oracle::bvn_rect(l1, oracle::inf(), l2, oracle::inf(), rho)) < 1e-9);
    }
  }

  TEST_CASE("bivariate rectangle reference values and limits") {
    const double c = 1.959963984540054;
    CHECK(std::abs(bvn_rectangle({-c, -c}, {c, c}, 0.0) - 0.9025) < 1e-8);
    CHECK(std::abs(bvn_rectangle({-c, -c}, {c, c}, 1.0) - 0.95) < 1e-8);
    CHECK(std::abs(bvn_rectangle({-c, -c}, {c, c}, -1.0) - 0.95) < 1e-8);
    CHECK(std::abs(bvn_upper(c, c, 0.0) - 0.000625) < 1e-9);
    CHECK(bvn_upper(oracle::inf(), 0.0, 0.3) == 0.0);
    CHECK(std::abs(bvn_upper(-oracle::inf(), 0.0, 0.3) - 0.5) < 1e-15);
    CHECK_THROWS_AS(bvn_rectangle({0.0, 0.0}, {1.0, 1.0}, 1.5), DomainError);
    CHECK_THROWS_AS(bvn_rectangle({1.0, 0.0}, {0.0, 1.0}, 0.5), DomainError);
  }

  TEST_CASE("lattice estimator: independent coordinates factorize") {
    const double c = 1.959963984540054;
    RectangleSpec spec{std::vector<double>(4, -c), std::vector<double>(4, c), CorrelationMatrix::identity(4)};
    const auto est = mvn_rectangle(spec, 1e-5, 3);
    CHECK(std::abs(est.probability - std::pow(0.95, 4)) < 1e-6);
  }

  TEST_CASE("lattice estimator is consistent with the bivariate quadrature") {
    for (double rho : {-0.6, 0.0, 0.5, 0.9}) {
      RectangleSpec spec{{-1.0, -0.5}, {2.0, oracle::inf()}, CorrelationMatrix::bivariate(rho)};
      const auto est = mvn_rectangle(spec, 1e-5, 11);
      const double exact = oracle::bvn_rect(-1.0, 2.0, -0.5, oracle::inf(), rho);
      CHECK(est.std_error <= 1e-5);
      CHECK(std::abs(est.probability - exact) < 4.0 * est.std_error + 1e-9);
    }
  }

  TEST_CASE("lattice estimator in 3-D against a conditioning oracle") {
    // equicorrelated rho: X_i = sqrt(rho) W + sqrt(1 - rho) E_i
    const double rho = 0.4, c = 2.1;
    Matrix m(3, 3, rho);
    for (int i = 0; i < 3; ++i) m(i, i) = 1.0;
    RectangleSpec spec{std::vector<double>(3, -c), std::vector<double>(3, c), CorrelationMatrix(m)};
    const auto est = mvn_rectangle(spec, 1e-5, 5);
    const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
    auto f = [&](double w) {
      const double p = oracle::Phi((c - a * w) / b) - oracle::Phi((-c - a * w) / b);
      return oracle::phi(w) * p * p * p;
    };
    const double exact = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 15, 1e-14);
    CHECK(std::abs(est.probability - exact) < 4.0 * est.std_error + 1e-9);
  }

  TEST_CASE("lattice estimator is reproducible and budget-limited") {
    RectangleSpec spec{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}, CorrelationMatrix::identity(3)};
    Matrix m(3, 3, 0.3);
    for (int i = 0; i < 3; ++i) m(i, i) = 1.0;
    spec.correlation = CorrelationMatrix(m);
    const auto a = mvn_rectangle(spec, 1e-4, 42), b = mvn_rectangle(spec, 1e-4, 42);
    CHECK(a.probability == b.probability);
    CHECK(a.std_error == b.std_error);
    MvnOptions tiny;
    tiny.max_evaluations = 2000;
    CHECK_THROWS_AS(mvn_rectangle(spec, 1e-12, 42, tiny), PrecisionUnreachable);
    RectangleSpec bad{{0.0, 0.0}, {1.0}, CorrelationMatrix::identity(2)};
    CHECK_THROWS_AS(mvn_rectangle(bad), DomainError);
  }

  TEST_CASE("cholesky reconstructs and rejects indefinite input") {
    Matrix m{{4.0, 2.0, 0.6}, {2.0, 2.0, 0.5}, {0.6, 0.5, 1.0}};
    const auto f = cholesky(m);
    CHECK(f.jitter == 0.0);
    CHECK(max_abs_diff(f.lower * f.lower.transpose(), m) < 1e-12);
    Matrix bad{{1.0, 0.9, -0.9}, {0.9, 1.0, 0.9}, {-0.9, 0.9, 1.0}};
    CHECK_THROWS_AS(cholesky(bad), NotPositiveDefinite);
    Matrix asym{{1.0, 0.2}, {0.3, 1.0}};
    CHECK_THROWS_AS(cholesky(asym), DomainError);
    // rank-deficient but PSD goes through with jitter
    Matrix singular{{1.0, 1.0}, {1.0, 1.0}};
    CHECK(cholesky(singular).jitter > 0.0);
  }

  TEST_CASE("seeded normal streams") {
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    const Matrix a = standard_normal_matrix(20000, 3, 99);
    const Matrix b = standard_normal_matrix(20000, 3, 99);
    CHECK(a == b);
    std::vector<double> chunk(kRowsPerStream * 3);
    fill_normal_chunk(99, 1, kRowsPerStream, 3, chunk.data());
    for (std::size_t j = 0; j < 3; ++j) CHECK(chunk[5 * 3 + j] == a(kRowsPerStream + 5, j));
    double mean = 0.0, var = 0.0;
    for (double v : a.data()) mean += v;
    mean /= static_cast<double>(a.data().size());
    for (double v : a.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(a.data().size());
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
  }

  TEST_CASE("mvn sampler reproduces its covariance") {
    Matrix cov{{2.0, 0.6, -0.3}, {0.6, 1.0, 0.2}, {-0.3, 0.2, 0.5}};
    MvnSampler s({1.0, -2.0, 0.5}, cov, 17);
    const Matrix x = mvn_sample(s, 200000);
    for (std::size_t i = 0; i < 3; ++i) {
      double mi = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) mi += x(r, i);
      mi /= static_cast<double>(x.rows());
      CHECK(std::abs(mi - s.mean()[i]) < 0.02);
      for (std::size_t j = 0; j < 3; ++j) {
        double mj = 0.0, c = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) mj += x(r, j);
        mj /= static_cast<double>(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) c += (x(r, i) - mi) * (x(r, j) - mj);
        c /= static_cast<double>(x.rows());
        CHECK(std::abs(c - cov(i, j)) < 0.03);
      }
    }
    CHECK(mvn_sample(s, 100) == mvn_sample(s, 100));
  }
}

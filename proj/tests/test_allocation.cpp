#include <doctest.h>

#include <cmath>

#include "comboplat/allocation.hpp"
#include "comboplat/errors.hpp"
#include "oracles.hpp"

using namespace comboplat;

TEST_SUITE("allocation_opt") {
  TEST_CASE("softmax lands on the open simplex") {
    const std::vector<double> theta = {0.0, 1.0, -2.0, 30.0, -30.0};
    const auto a = softmax_to_allocation(theta);
    double sum = 0.0;
    for (double p : a.ratios) {
      CHECK(p > 0.0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(a.ratios[1] / a.ratios[0] == doctest::Approx(std::exp(1.0)));
  }

  TEST_CASE("noncentralities against the written-out variances") {
    const auto sc = DesignScenario::single(0.4, 1.3, 0.2, 0.5, 1.5);
    Allocation al;
    al.ratios = {0.45, 0.3, 0.25};
    const auto w = wald_noncentrality(sc, al, 120.0);
    const auto ref = oracle::wald(0.45, 0.3, 0.25, 1.3, 0.2, 0.4, 1.5);
    CHECK(w[0].W1 == doctest::Approx(120.0 * ref[0]).epsilon(1e-13));
    CHECK(w[0].W2 == doctest::Approx(120.0 * ref[1]).epsilon(1e-13));
    CHECK(maxmin_objective(sc, al) == doctest::Approx(std::min(ref[0], ref[1])).epsilon(1e-13));
  }

  TEST_CASE("closed form at s = 1") {
    const auto a = closed_form_allocation(1.0);
    CHECK(a.ratios[0] == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-14));
    CHECK(a.ratios[1] == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-14));
    CHECK(a.ratios[2] == doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-14));
    const auto g = oracle::grid_maxmin(1.0, 0.0);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a.ratios[i] - g.p[i]) <= 1e-3);
    CHECK_THROWS_AS(closed_form_allocation(0.0), DomainError);
  }

  TEST_CASE("closed form sums to one and balances W1 = W2 only at s = 1") {
    for (double s : {0.5, 0.7, 1.0, 1.5, 2.0}) {
      const auto a = closed_form_allocation(s);
      CHECK(a.ratios[0] + a.ratios[1] + a.ratios[2] == doctest::Approx(1.0));
    }
    const auto w = oracle::wald(closed_form_allocation(1.0).ratios[0], closed_form_allocation(1.0).ratios[1],
                                closed_form_allocation(1.0).ratios[2], 1.0, 0.0);
    CHECK(w[0] == doctest::Approx(w[1]).epsilon(1e-12));
  }

  TEST_CASE("optimizer matches exhaustive grid search") {
    for (double s : {0.7, 1.0, 2.0}) {
      for (double rho : {0.0, 0.3, 0.6}) {
        const auto g = oracle::grid_maxmin_refined(s, rho);
        const auto r = optimize_allocation_detailed(DesignScenario::single(1.0, s, rho, 0.0));
        INFO("s = " << s << ", rho = " << rho);
        // the ridge W1 = W2 is flat near the optimum: value is sharp, location less so
        CHECK(r.objective >= g.value - 1e-12);
        CHECK(r.objective <= g.value * (1.0 + 1e-6));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(r.allocation.ratios[i] - g.p[i]) <= 1e-3);
        CHECK(r.converged_starts >= 1);
        CHECK(r.start_objectives.size() == 8);
      }
    }
  }

  TEST_CASE("optimum is scale free in delta and sigma2") {
    const auto a = optimize_allocation(DesignScenario::single(0.3, 1.2, 0.4, 0.2, 1.0));
    const auto b = optimize_allocation(DesignScenario::single(2.0, 1.2, 0.4, 0.2, 7.0));
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a.ratios[i] - b.ratios[i]) < 1e-6);
  }

  TEST_CASE("symmetric platform gives symmetric substudy allocations") {
    DesignScenario sc;
    sc.K = 2;
    sc.delta = {0.5, 0.5};
    sc.synergy = {1.1, 1.1};
    sc.rho_ABk_A = {0.3, 0.3};
    sc.rho_ABk_Bk = {0.2, 0.2};
    const auto a = optimize_allocation(sc);
    CHECK(std::abs(a.p_B(0) - a.p_B(1)) < 1e-4);
    CHECK(std::abs(a.p_AB(0) - a.p_AB(1)) < 1e-4);
  }

  TEST_CASE("closed-form switch only applies where the formula is defined") {
    AllocationOptions o;
    o.use_closed_form = true;
    const auto r = optimize_allocation_detailed(DesignScenario::single(1.0, 1.5), o);
    CHECK(r.closed_form);
    CHECK(r.allocation.ratios == closed_form_allocation(1.5).ratios);
    const auto r2 = optimize_allocation_detailed(DesignScenario::single(1.0, 1.5, 0.3), o);
    CHECK_FALSE(r2.closed_form);
  }

  TEST_CASE("nelder-mead on a smooth bowl and on Rosenbrock") {
    auto bowl = [](std::span<const double> x) { return (x[0] - 1.0) * (x[0] - 1.0) + 3.0 * (x[1] + 2.0) * (x[1] + 2.0); };
    const auto r = nelder_mead(bowl, {0.0, 0.0});
    CHECK(r.converged);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-6));
    auto rosen = [](std::span<const double> x) {
      return 100.0 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]) + (1.0 - x[0]) * (1.0 - x[0]);
    };
    const auto q = nelder_mead(rosen, {-1.2, 1.0});
    CHECK(std::abs(q.x[0] - 1.0) < 1e-4);
    CHECK(std::abs(q.x[1] - 1.0) < 1e-4);
  }
}

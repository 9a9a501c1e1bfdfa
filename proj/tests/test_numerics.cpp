#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ringcascade/ode.hpp"
#include "ringcascade/quadrature.hpp"

#include <cmath>
#include <numbers>

using namespace ringcascade;
using doctest::Approx;

TEST_CASE("Gauss-Legendre weights sum to the interval length") {
  for (int n : {1, 2, 5, 12, 40}) {
    GaussLegendreRule<> rule(n);
    CHECK(rule.weights().sum() == Approx(2).epsilon(1e-14));
    for (int i = 0; i < n; ++i) CHECK(std::abs(rule.nodes()(i)) < 1);
  }
}

TEST_CASE("Gauss-Legendre is exact through degree 2n-1") {
  for (int n : {2, 4, 8, 12}) {
    GaussLegendreRule<> rule(n);
    for (int deg = 0; deg <= 2 * n - 1; ++deg) {
      const double got = rule.apply([deg](double x) { return std::pow(x, deg); }, 0.0, 2.0);
      const double exact = std::pow(2.0, deg + 1) / (deg + 1);
      CHECK(got == Approx(exact).epsilon(1e-13));
    }
  }
}

TEST_CASE("Gauss-Legendre rejects an empty rule") {
  CHECK_THROWS_AS(GaussLegendreRule<>(0), std::invalid_argument);
}

TEST_CASE("Gauss-Kronrod handles an endpoint singularity") {
  AdaptiveGaussKronrod<> gk;
  gk.rel_tol = 1e-12;
  const auto r = gk.integrate([](double x) { return 1 / std::sqrt(x); }, 0.0, 1.0);
  CHECK(r.converged);
  CHECK(r.value == Approx(2).epsilon(1e-10));
}

TEST_CASE("Gauss-Kronrod stops at the rounding floor on a cancelling integrand") {
  AdaptiveGaussKronrod<> gk;
  gk.rel_tol = 1e-14;
  const auto r = gk.integrate([](double x) { return std::sin(x); }, -3.0, 3.0);
  CHECK(r.converged);
  CHECK(std::abs(r.value) < 1e-13);
}

TEST_CASE("Gauss-Kronrod panels match the single-interval result") {
  AdaptiveGaussKronrod<> gk;
  gk.rel_tol = 1e-13;
  const std::vector<double> edges{0, 0.5, 1, 3};
  auto f = [](double x) { return std::exp(-x) * std::cos(5 * x); };
  const auto a = gk.integrate_panels(f, edges.begin(), edges.end());
  const auto b = gk.integrate(f, 0.0, 3.0);
  CHECK(a.value == Approx(b.value).epsilon(1e-12));
}

TEST_CASE("Gauss-Kronrod reports non-convergence instead of looping") {
  AdaptiveGaussKronrod<> gk;
  gk.rel_tol = 1e-15;
  gk.max_intervals = 3;
  const auto r = gk.integrate([](double x) { return std::sin(1 / (x + 1e-3)); }, 0.0, 1.0);
  CHECK_FALSE(r.converged);
}

TEST_CASE("tensor Gauss integrates a separable product") {
  AdaptiveTensorGauss<> tg(8);
  tg.rel_tol = 1e-12;
  const auto r = tg.integrate([](double x, double y) { return std::exp(x + y); }, 0.0, 1.0, 0.0,
                              1.0);
  CHECK(r.converged);
  CHECK(r.value == Approx(std::pow(std::numbers::e - 1, 2)).epsilon(1e-12));
}

TEST_CASE("tensor Gauss refines toward a corner peak") {
  AdaptiveTensorGauss<> tg(6);
  tg.rel_tol = 1e-9;
  // Integral of 1/(x + y + 1e-3)^2 over the unit square, in closed form.
  const double c = 1e-3;
  const auto r = tg.integrate([c](double x, double y) { return 1 / std::pow(x + y + c, 2); }, 0.0,
                              1.0, 0.0, 1.0);
  const double exact = std::log((1 + c) * (1 + c) / (c * (2 + c)));
  CHECK(r.converged);
  CHECK(r.value == Approx(exact).epsilon(1e-8));
}

TEST_CASE("Dormand-Prince reproduces exponential decay and dense output") {
  using DP = DormandPrince54<>;
  DP::Vector y0(1);
  y0 << 1;
  DP dp([](double, const DP::Vector& y, DP::Vector& dy) { dy = -y; }, 0.0, y0, {});
  double worst_dense = 0;
  while (dp.t() < 5) {
    REQUIRE(dp.step(5));
    const double mid = 0.5 * (dp.t_prev() + dp.t());
    worst_dense = std::max(worst_dense, std::abs(dp.interpolate(mid)(0) / std::exp(-mid) - 1));
  }
  CHECK(dp.t() == 5);
  CHECK(dp.y()(0) == Approx(std::exp(-5.0)).epsilon(1e-8));
  CHECK(worst_dense < 1e-7);
}

TEST_CASE("Dormand-Prince keeps the oscillator energy") {
  using DP = DormandPrince54<>;
  DP::Vector y0(2);
  y0 << 1, 0;
  StepControl<> ctl;
  ctl.rel_tol = 1e-11;
  ctl.abs_tol = 1e-13;
  DP dp([](double, const DP::Vector& y, DP::Vector& dy) { dy << y(1), -y(0); }, 0.0, y0, ctl);
  while (dp.t() < 20) REQUIRE(dp.step(20));
  CHECK(dp.y().squaredNorm() == Approx(1).epsilon(1e-8));
  CHECK(dp.y()(0) == Approx(std::cos(20.0)).epsilon(1e-8));
}

TEST_CASE("Dormand-Prince signals step collapse at a finite-time singularity") {
  using DP = DormandPrince54<>;
  DP::Vector y0(1);
  y0 << 1;
  DP dp([](double, const DP::Vector& y, DP::Vector& dy) { dy = y.array().square(); }, 0.0, y0, {});
  bool collapsed = false;
  for (int i = 0; i < 100000 && !collapsed; ++i) collapsed = !dp.step(2);
  CHECK(collapsed);
  CHECK(dp.t() < 1);
  CHECK(dp.t() > 0.999);
}

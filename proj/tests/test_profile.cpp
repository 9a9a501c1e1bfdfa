#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ringcascade/profile.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace ringcascade;
using doctest::Approx;

namespace {

const ProfileSpec& p50() {
  static const ProfileSpec p = make_profile(50, 0.25);
  return p;
}

const CoefficientTable& table50() {
  static const CoefficientTable t = CoefficientTable::build(p50(), 96);
  return t;
}

// Independent adaptive quadrature (scipy dblquad at rel 1e-12) of the same integrals.
constexpr double kLambda1 = 1.6258588905947659e-06;
constexpr double kLambdaPrime1 = -8.1254848181458948e-06;
constexpr double kLambdaHalf = 5.1845104839642334e-05;
constexpr double kLambdaPrimeHalf = -5.1748092564982758e-04;
constexpr double kLambda002 = 80.28929526601037;
constexpr double kLambdaPrime002 = -9939.5511167107907;
constexpr double kLambda0 = 483.66819795913995;
constexpr double kWeight = 9.1038024273169782;

}  // namespace

TEST_CASE("make_profile support box and validation") {
  const auto b = p50().upper_support();
  CHECK(b.r_lo == 0.75);
  CHECK(b.r_hi == 1.25);
  CHECK(b.z_lo == 37.5);
  CHECK(b.z_hi == 62.5);
  CHECK_THROWS_AS(make_profile(50, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_profile(50, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_profile(-1, 0.25), std::invalid_argument);
  CHECK_THROWS_AS(make_profile(50, 0.25, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_profile(50, 0.25, 1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(make_profile(50, 0.25, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("eval_profile point values") {
  const auto& p = p50();
  CHECK(eval_profile(p, 1, 50) == -1);
  CHECK(eval_profile(p, 1, -50) == 1);
  CHECK(eval_profile(p, 2, 50) == 0);
  CHECK(eval_profile(p, 1, 37.5) == 0);
  for (double r : {0.0, 0.5, 1.0, 1.1, 3.0}) CHECK(eval_profile(p, r, 0) == 0);
}

TEST_CASE("eval_profile is odd in z, nonpositive above and zero off the support") {
  const auto& p = p50();
  const auto box = p.upper_support();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ur(0, 2), uz(-80, 80);
  for (int i = 0; i < 10000; ++i) {
    const double r = ur(rng), z = uz(rng);
    const double v = eval_profile(p, r, z);
    CHECK(v + eval_profile(p, r, -z) == 0);
    if (z > 0) CHECK(v <= 0);
    if (!box.contains(r, std::abs(z))) CHECK(v == 0);
  }
}

TEST_CASE("bump is peaked and compactly supported") {
  CHECK(bump(0) == 1);
  CHECK(bump(1) == 0);
  CHECK(bump(-1.5) == 0);
  CHECK(bump(0.5) == Approx(std::exp(1 - 1 / 0.75)));
  CHECK(bump(0.5, 2) < bump(0.5, 1));
}

TEST_CASE("lambda_frozen matches the independent quadrature") {
  const auto& p = p50();
  CHECK(lambda_frozen(p, 1) == Approx(kLambda1).epsilon(1e-7));
  CHECK(lambda_frozen(p, 0.5) == Approx(kLambdaHalf).epsilon(1e-7));
  CHECK(lambda_frozen(p, 0.02) == Approx(kLambda002).epsilon(1e-7));
  CHECK(lambda_frozen_limit(p) == Approx(kLambda0).epsilon(1e-7));
  CHECK(lambda_frozen(p, 0) == Approx(kLambda0).epsilon(1e-7));
  CHECK(lambda_frozen_prime(p, 1) == Approx(kLambdaPrime1).epsilon(1e-7));
  CHECK(lambda_frozen_prime(p, 0.5) == Approx(kLambdaPrimeHalf).epsilon(1e-7));
  CHECK(lambda_frozen_prime(p, 0.02) == Approx(kLambdaPrime002).epsilon(1e-7));
  CHECK(localization_weight(p) == Approx(kWeight).epsilon(1e-8));
}

TEST_CASE("lambda_frozen is nonincreasing and its derivative vanishes at zero") {
  const auto& p = p50();
  CHECK(lambda_frozen(p, 0.5) >= lambda_frozen(p, 1));
  CHECK(lambda_frozen_prime(p, 0) == 0);
  // Lambda' is linear in gamma near zero.
  const double slope = lambda_frozen_prime(p, 1e-8) / 1e-8;
  CHECK(slope < 0);
  CHECK(lambda_frozen_prime(p, 1e-7) / 1e-7 == Approx(slope).epsilon(1e-6));
  for (double g : {1e-4, 1e-2, 0.1, 0.7, 1.0}) CHECK(lambda_frozen_prime(p, g) <= 0);
  CHECK_THROWS_AS(lambda_frozen(p, -0.1), std::invalid_argument);
}

TEST_CASE("lambda_frozen_prime agrees with a finite difference") {
  const auto& p = p50();
  QuadratureSettings tight;
  tight.rel_tol = 1e-12;
  for (int i = 0; i < 20; ++i) {
    const double g = std::pow(10.0, -4 + 4.0 * i / 19);
    const double h = 1e-4 * g;
    const double fd = (lambda_frozen(p, g + h, tight) - lambda_frozen(p, g - h, tight)) / (2 * h);
    CAPTURE(g);
    CHECK(lambda_frozen_prime(p, g) == Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("lambda_localized and psi examples") {
  CHECK(lambda_localized(0, 50, 1) == 50);
  CHECK(lambda_localized(1.0 / 50, 50, 1) == Approx(50 * std::pow(2.0, -2.5)).epsilon(1e-15));
  CHECK(lambda_localized(1, 50, 1) == Approx(50 * std::pow(2501.0, -2.5)).epsilon(1e-15));
  CHECK(psi(0) == 0);
  CHECK(psi(1 / std::sqrt(2.0)) == Approx(0.20366364992571886).epsilon(1e-15));
  CHECK(psi(1e8) < 1e-20);
  CHECK(psi_log_derivative(1 / std::sqrt(2.0)) == Approx(0).epsilon(1e-15));
  // x Gamma^2 Lambda_loc(Gamma) = x(0) L^{-2/3} Psi(L Gamma) with x = x(0) Gamma^{-1/3}.
  for (double g : {1.0, 0.3, 0.01, 1e-4}) {
    const double L = 50, x0 = 0.7;
    const double lhs = x0 * std::pow(g, -1.0 / 3) * g * g * lambda_localized(g, L, 1);
    CHECK(lhs == Approx(x0 * std::pow(L, -2.0 / 3) * psi(L * g)).epsilon(1e-13));
  }
}

TEST_CASE("q_correction and kappa") {
  const auto& p = p50();
  const double g = 0.02;
  const double q = q_correction(p, g);
  CHECK(q == Approx(3 * g * std::abs(kLambdaPrime002) / kLambda002).epsilon(1e-7));
  CHECK(kappa(p, g) == Approx(5 - q).epsilon(1e-14));
  CHECK(q_correction(p, 1e-7) < 1e-6);
  CHECK(kappa(p, 1e-7) == Approx(5).epsilon(1e-6));
  const auto b = q_sandwich(p, g);
  const double lm = 30 * g, lp = 250.0 / 3 * g;
  CHECK(b.lower == Approx(15 * lm * lm / (1 + lm * lm)));
  CHECK(b.upper == Approx(15 * lp * lp / (1 + lp * lp)));
  CHECK(b.lower <= q);
  CHECK(q <= b.upper);
}

TEST_CASE("kappa is dominated by the lower-slope psi log-derivative in the productive window") {
  const auto& p = p50();
  const double lm = p.slope_lo();
  for (double g = 1; g * p.L >= productive_threshold(p.eta); g *= 0.7) {
    CAPTURE(g);
    CHECK(kappa(p, g) <= psi_log_derivative(g * lm) + 1e-9);
  }
}

TEST_CASE("productive threshold") {
  CHECK(productive_threshold(0.25) == Approx(5.0 / 3 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("coefficient table invariants") {
  const auto& t = table50();
  CHECK(t.size() == 96);
  CHECK(t.gamma_grid()(0) == Approx(CoefficientTable::kGammaMin));
  CHECK(t.gamma_grid()(t.size() - 1) == 1);
  CHECK(t.lambda_at_zero() == Approx(kLambda0).epsilon(1e-7));
  for (int i = 1; i < t.size(); ++i) {
    CHECK(t.gamma_grid()(i) > t.gamma_grid()(i - 1));
    CHECK(t.lambda()(i) <= t.lambda()(i - 1));
    CHECK(t.kappa()(i) == Approx(5 - t.q_corr()(i)));
  }
  CHECK(t.lambda_at(1e-9) == t.lambda_at_zero());
  CHECK(t.lambda_at(2) == t.lambda()(t.size() - 1));
  CHECK(t.lambda_at(t.gamma_grid()(40)) == Approx(t.lambda()(40)).epsilon(1e-14));
}

TEST_CASE("table interpolation tracks direct quadrature between nodes") {
  const auto& t = table50();
  const auto& p = p50();
  for (double g : {3e-6, 4.4e-4, 0.0213, 0.11, 0.5, 0.93}) {
    CAPTURE(g);
    CHECK(t.lambda_at(g) == Approx(lambda_frozen(p, g)).epsilon(1e-3));
    CHECK(std::log(t.lambda_at(g)) == Approx(t.log_lambda_at_log(std::log(g))).epsilon(1e-14));
  }
}

TEST_CASE("table CSV has the documented columns") {
  std::ostringstream os;
  table50().write_csv(os);
  std::istringstream is(os.str());
  std::string first, second;
  std::getline(is, first);
  std::getline(is, second);
  CHECK(first == "# ringcascade-csv v1");
  CHECK(second == "gamma,lambda,lambda_prime,q,kappa");
}

TEST_CASE("q_star: small-L bound, grid refinement and sign") {
  const auto small = make_profile(0.1, 0.25);
  const double lp = 0.1 * 1.25 / 0.75;
  const auto qs = q_star(small, 64);
  CHECK(qs.value >= 0);
  CHECK(qs.value <= 15 * lp * lp / (1 + lp * lp));
  CHECK(15 * lp * lp / (1 + lp * lp) == Approx(0.405).epsilon(1e-3));

  const auto coarse = q_star(p50(), 64);
  const auto fine = q_star(p50(), 256);
  CHECK(std::abs(coarse.value - fine.value) <= 1e-3);
  CHECK(fine.value == Approx(14.99297).epsilon(1e-5));
  CHECK(fine.argmax > 0);
  CHECK(fine.argmax <= 1);
}

TEST_CASE("localization: frozen coefficient approaches the weighted localized one as eta shrinks") {
  const double L = 50;
  std::vector<double> gap;
  for (double eta : {0.25, 0.05, 0.01}) {
    const auto p = make_profile(L, eta);
    const double w = localization_weight(p);
    double worst = 0;
    for (double g : {1.0, 0.05, 0.01}) {
      const double ratio = lambda_frozen(p, g) / (w * lambda_localized(g, L, 1));
      worst = std::max(worst, std::abs(ratio - 1));
    }
    gap.push_back(worst);
  }
  CHECK(gap[1] < gap[0]);
  CHECK(gap[2] < gap[1]);
  CHECK(gap[2] < 0.05);
}

#include "ringcascade/profile.hpp"

#include "ringcascade/format.hpp"
#include "ringcascade/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ringcascade {

ProfileSpec make_profile(double L, double eta, double r0, double amplitude, int bump_order) {
  if (!(eta > 0 && eta < 1)) throw std::invalid_argument("make_profile: eta must lie in (0,1)");
  if (!(L > 0)) throw std::invalid_argument("make_profile: L must be positive");
  if (!(r0 > 0)) throw std::invalid_argument("make_profile: r0 must be positive");
  if (!(amplitude > 0)) throw std::invalid_argument("make_profile: amplitude must be positive");
  if (amplitude < 1) throw std::invalid_argument("make_profile: amplitude must be >= 1");
  if (bump_order < 1) throw std::invalid_argument("make_profile: bump_order must be >= 1");
  return ProfileSpec{r0, L, eta, bump_order, amplitude};
}

double bump(double s, int order) {
  const double u = 1 - s * s;
  if (!(u > 0)) return 0;
  return std::exp(1 - 1 / std::pow(u, order));
}

double eval_profile(const ProfileSpec& p, double r, double z) {
  if (z == 0) return 0;
  const double az = std::abs(z);
  const double g = bump((r - p.r0) / (p.eta * p.r0), p.bump_order) *
                   bump((az - p.z0()) / (p.eta * p.z0()), p.bump_order);
  if (g == 0) return 0;
  return z > 0 ? -p.amplitude * g : p.amplitude * g;
}

namespace {

// Integral over z > 0 of kernel(r, z) * (-phi(r, z)) dr dz, doubled.
template <class Kernel>
double profile_moment(const ProfileSpec& p, const QuadratureSettings& qs, Kernel&& kernel,
                      const char* what) {
  AdaptiveTensorGauss<double> quad(qs.order);
  quad.rel_tol = qs.rel_tol;
  quad.max_depth = qs.max_depth;
  const double r0 = p.r0, z0 = p.z0(), eta = p.eta;
  const int n = p.bump_order;
  auto f = [&](double s, double t) {
    const double w = bump(s, n) * bump(t, n);
    if (w == 0) return 0.0;
    return kernel(r0 * (1 + eta * s), z0 * (1 + eta * t)) * w;
  };
  const auto res = quad.integrate(f, -1.0, 1.0, -1.0, 1.0);
  const double jac = 2 * p.amplitude * eta * eta * r0 * z0;
  if (!res.converged) {
    throw QuadratureError(std::string(what) + ": quadrature did not reach tolerance",
                          res.value * jac, res.error * jac);
  }
  return res.value * jac;
}

}  // namespace

double lambda_frozen(const ProfileSpec& p, double gamma, const QuadratureSettings& q) {
  if (!(gamma >= 0)) throw std::invalid_argument("lambda_frozen: gamma must be >= 0");
  const double g2 = gamma * gamma;
  return profile_moment(
      p, q,
      [g2](double r, double z) {
        const double d = r * r + g2 * z * z;
        return r * r * z / (d * d * std::sqrt(d));
      },
      "lambda_frozen");
}

double lambda_frozen_prime(const ProfileSpec& p, double gamma, const QuadratureSettings& q) {
  if (!(gamma >= 0)) throw std::invalid_argument("lambda_frozen_prime: gamma must be >= 0");
  if (gamma == 0) return 0;
  const double g2 = gamma * gamma;
  return -5 * gamma *
         profile_moment(
             p, q,
             [g2](double r, double z) {
               const double d = r * r + g2 * z * z;
               return r * r * z * z * z / (d * d * d * std::sqrt(d));
             },
             "lambda_frozen_prime");
}

double lambda_frozen_limit(const ProfileSpec& p, const QuadratureSettings& q) {
  return lambda_frozen(p, 0.0, q);
}

double lambda_localized(double gamma, double L, double r0) {
  if (!(gamma >= 0)) throw std::invalid_argument("lambda_localized: gamma must be >= 0");
  const double lg = L * gamma;
  return (L * r0) / (r0 * r0 * r0) * std::pow(1 + lg * lg, -2.5);
}

double psi(double zeta) {
  if (!(zeta >= 0)) throw std::invalid_argument("psi: zeta must be >= 0");
  if (zeta == 0) return 0;
  return std::pow(zeta, 5.0 / 3.0) * std::pow(1 + zeta * zeta, -2.5);
}

double psi_log_derivative(double zeta) {
  const double z2 = zeta * zeta;
  return 5 - 15 * z2 / (1 + z2);
}

double q_correction(const ProfileSpec& p, double gamma, const QuadratureSettings& q) {
  if (gamma == 0) return 0;
  const double lam = lambda_frozen(p, gamma, q);
  const double lp = lambda_frozen_prime(p, gamma, q);
  return 3 * gamma * std::abs(lp) / lam;
}

double kappa(const ProfileSpec& p, double gamma, const QuadratureSettings& q) {
  return 5 - q_correction(p, gamma, q);
}

QBounds q_sandwich(const ProfileSpec& p, double gamma) {
  auto f = [](double s) { return 15 * s * s / (1 + s * s); };
  return {f(gamma * p.slope_lo()), f(gamma * p.slope_hi())};
}

double localization_weight(const ProfileSpec& p, const QuadratureSettings& q) {
  return profile_moment(p, q, [](double, double) { return 1.0; }, "localization_weight");
}

double productive_threshold(double eta) {
  return (1 + eta) / (1 - eta) / std::numbers::sqrt2;
}

CoefficientTable CoefficientTable::build(const ProfileSpec& p, int points,
                                         const QuadratureSettings& q) {
  if (points < 4) throw std::invalid_argument("CoefficientTable: need at least 4 points");
  CoefficientTable t;
  t.profile_ = p;
  t.gamma_.resize(points);
  t.lambda_.resize(points);
  t.lambda_prime_.resize(points);
  t.q_.resize(points);
  t.log_gamma_.resize(points);
  t.log_lambda_.resize(points);
  t.slope_.resize(points);
  const double lo = std::log(kGammaMin);
  t.h_ = -lo / (points - 1);
  for (int i = 0; i < points; ++i) {
    const double lg = i == points - 1 ? 0.0 : lo + i * t.h_;
    const double g = i == points - 1 ? 1.0 : std::exp(lg);
    t.gamma_(i) = g;
    t.log_gamma_(i) = lg;
    t.lambda_(i) = lambda_frozen(p, g, q);
    t.lambda_prime_(i) = lambda_frozen_prime(p, g, q);
    t.q_(i) = 3 * g * std::abs(t.lambda_prime_(i)) / t.lambda_(i);
    t.log_lambda_(i) = std::log(t.lambda_(i));
    t.slope_(i) = -t.q_(i) / 3;
  }
  t.lambda0_ = lambda_frozen_limit(p, q);
  // Fritsch-Carlson limiter on the (decreasing) log-log data.
  for (int i = 0; i + 1 < points; ++i) {
    const double delta = (t.log_lambda_(i + 1) - t.log_lambda_(i)) / t.h_;
    if (delta == 0) {
      t.slope_(i) = t.slope_(i + 1) = 0;
      continue;
    }
    double a = t.slope_(i) / delta, b = t.slope_(i + 1) / delta;
    if (a < 0) t.slope_(i) = a = 0;
    if (b < 0) t.slope_(i + 1) = b = 0;
    const double r2 = a * a + b * b;
    if (r2 > 9) {
      const double tau = 3 / std::sqrt(r2);
      t.slope_(i) = tau * a * delta;
      t.slope_(i + 1) = tau * b * delta;
    }
  }
  return t;
}

std::pair<int, double> CoefficientTable::locate(double gamma) const {
  return locate_log(std::log(gamma));
}

std::pair<int, double> CoefficientTable::locate_log(double x) const {
  int i = static_cast<int>(std::floor((x - log_gamma_(0)) / h_));
  i = std::clamp(i, 0, size() - 2);
  const double s = (x - log_gamma_(i)) / (log_gamma_(i + 1) - log_gamma_(i));
  return {i, s};
}

double CoefficientTable::lambda_at(double gamma) const {
  if (gamma < gamma_(0)) return lambda0_;
  if (gamma >= 1) return lambda_(size() - 1);
  return std::exp(log_lambda_at_log(std::log(gamma)));
}

double CoefficientTable::log_lambda_at_log(double x) const {
  if (x < log_gamma_(0)) return std::log(lambda0_);
  if (x >= 0) return log_lambda_(size() - 1);
  const auto [i, s] = locate_log(x);
  const double hx = log_gamma_(i + 1) - log_gamma_(i);
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  const double y = h00 * log_lambda_(i) + h10 * hx * slope_(i) + h01 * log_lambda_(i + 1) +
                   h11 * hx * slope_(i + 1);
  return y;
}

double CoefficientTable::q_at(double gamma) const {
  if (gamma < gamma_(0)) return 0;
  if (gamma >= 1) return q_(size() - 1);
  const auto [i, s] = locate(gamma);
  const double hx = log_gamma_(i + 1) - log_gamma_(i);
  const double s2 = s * s;
  const double d00 = 6 * s2 - 6 * s, d10 = 3 * s2 - 4 * s + 1;
  const double d01 = -6 * s2 + 6 * s, d11 = 3 * s2 - 2 * s;
  const double dy = (d00 * log_lambda_(i) + d01 * log_lambda_(i + 1)) / hx +
                    d10 * slope_(i) + d11 * slope_(i + 1);
  return -3 * dy;
}

void CoefficientTable::write_csv(std::ostream& os) const {
  os << kCsvHeader << '\n' << "gamma,lambda,lambda_prime,q,kappa\n";
  for (int i = 0; i < size(); ++i) {
    os << fmt17(gamma_(i)) << ',' << fmt17(lambda_(i)) << ',' << fmt17(lambda_prime_(i)) << ','
       << fmt17(q_(i)) << ',' << fmt17(5 - q_(i)) << '\n';
  }
}

QStar q_star(const CoefficientTable& table, const QuadratureSettings& q) {
  const auto& qs = table.q_corr();
  Eigen::Index imax = 0;
  const double grid_max = qs.maxCoeff(&imax);
  const int n = table.size();
  const auto& grid = table.gamma_grid();
  double a = std::log(grid(std::max<Eigen::Index>(imax - 1, 0)));
  double b = std::log(grid(std::min<Eigen::Index>(imax + 1, n - 1)));
  auto Q = [&](double lg) { return q_correction(table.profile(), std::exp(std::min(lg, 0.0)), q); };
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double qc = Q(c), qd = Q(d);
  while (b - a > 1e-4) {
    if (qc > qd) {
      b = d;
      d = c;
      qd = qc;
      c = b - phi * (b - a);
      qc = Q(c);
    } else {
      a = c;
      c = d;
      qc = qd;
      d = a + phi * (b - a);
      qd = Q(d);
    }
  }
  const double qa = Q(a), qb = Q(b);
  double best = std::max({qc, qd, qa, qb});
  double arg = best == qa ? a : best == qb ? b : best == qc ? c : d;
  if (grid_max > best) {
    best = grid_max;
    arg = std::log(grid(imax));
  }
  const double spread = std::max({qa, qb, qc, qd}) - std::min({qa, qb, qc, qd});
  return {best, std::exp(arg), spread};
}

QStar q_star(const ProfileSpec& p, int points, const QuadratureSettings& q) {
  return q_star(CoefficientTable::build(p, points, q), q);
}

}  // namespace ringcascade

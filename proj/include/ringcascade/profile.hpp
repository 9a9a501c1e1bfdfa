#pragma once

#include "ringcascade/quadrature.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

namespace ringcascade {

/// Axis-aligned rectangle in the (r, z) half plane.
struct SupportBox {
  double r_lo, r_hi, z_lo, z_hi;
  bool contains(double r, double z) const {
    return r > r_lo && r < r_hi && z > z_lo && z < z_hi;
  }
};

/// Smooth ring profile, odd in z, nonpositive on z > 0, concentrated in a
/// box around (r0, L r0) whose half widths are eta r0 and eta L r0.
struct ProfileSpec {
  double r0 = 1;
  double L = 50;
  double eta = 0.25;
  int bump_order = 1;
  double amplitude = 1;

  double z0() const { return L * r0; }
  /// Support in the upper half plane; the lower half is its mirror image.
  SupportBox upper_support() const {
    return {(1 - eta) * r0, (1 + eta) * r0, (1 - eta) * z0(), (1 + eta) * z0()};
  }
  /// Cone slopes bracketing z/r on the support.
  double slope_lo() const { return (1 - eta) / (1 + eta) * L; }
  double slope_hi() const { return (1 + eta) / (1 - eta) * L; }
};

/// Throws std::invalid_argument on eta outside (0,1), nonpositive L, r0 or
/// amplitude, amplitude < 1, or bump_order < 1.
ProfileSpec make_profile(double L, double eta, double r0 = 1, double amplitude = 1,
                         int bump_order = 1);

/// exp(1 - 1/(1-s^2)^order) on |s| < 1, zero elsewhere. Peak value 1 at s = 0.
double bump(double s, int order = 1);

double eval_profile(const ProfileSpec& p, double r, double z);

struct QuadratureSettings {
  double rel_tol = 1e-8;
  int max_depth = 14;
  int order = 12;
};

/// Integral of r^2 z / (r^2 + gamma^2 z^2)^{5/2} against -phi over the whole
/// (r, z) half plane, i.e. twice the z > 0 contribution. The cascade uses
/// gamma in (0, 1]; gamma = 0 gives the limit kernel z / r^3.
double lambda_frozen(const ProfileSpec& p, double gamma, const QuadratureSettings& q = {});

/// d/dgamma of lambda_frozen, computed from the differentiated kernel.
double lambda_frozen_prime(const ProfileSpec& p, double gamma, const QuadratureSettings& q = {});

double lambda_frozen_limit(const ProfileSpec& p, const QuadratureSettings& q = {});

/// (z0 / r0^3) (1 + L^2 gamma^2)^{-5/2}.
double lambda_localized(double gamma, double L, double r0);

/// zeta^{5/3} (1 + zeta^2)^{-5/2}.
double psi(double zeta);

/// 3 zeta psi'(zeta) / psi(zeta) = 5 - 15 zeta^2 / (1 + zeta^2).
double psi_log_derivative(double zeta);

double q_correction(const ProfileSpec& p, double gamma, const QuadratureSettings& q = {});
double kappa(const ProfileSpec& p, double gamma, const QuadratureSettings& q = {});

/// Two-sided bounds on q_correction implied by the cone slopes.
struct QBounds {
  double lower, upper;
};
QBounds q_sandwich(const ProfileSpec& p, double gamma);

/// Integral of |phi| over the half plane (both signs of z).
double localization_weight(const ProfileSpec& p, const QuadratureSettings& q = {});

/// Threshold cone variable ((1+eta)/(1-eta)) / sqrt(2).
double productive_threshold(double eta);

/// Tabulated coefficient on a log-uniform gamma grid.
class CoefficientTable {
public:
  static constexpr int kDefaultPoints = 512;
  static constexpr double kGammaMin = 1e-6;

  /// Builds the table by quadrature at every node. Throws QuadratureError if
  /// any node fails to converge.
  static CoefficientTable build(const ProfileSpec& p, int points = kDefaultPoints,
                                const QuadratureSettings& q = {});

  const ProfileSpec& profile() const { return profile_; }
  const Eigen::VectorXd& gamma_grid() const { return gamma_; }
  const Eigen::VectorXd& lambda() const { return lambda_; }
  const Eigen::VectorXd& lambda_prime() const { return lambda_prime_; }
  const Eigen::VectorXd& q_corr() const { return q_; }
  Eigen::VectorXd kappa() const { return (5.0 - q_.array()).matrix(); }
  double lambda_at_zero() const { return lambda0_; }
  int size() const { return static_cast<int>(gamma_.size()); }

  /// Monotone cubic Hermite interpolation of log lambda in log gamma. Queries
  /// below the grid return the gamma -> 0 limit; queries above 1 are clamped.
  double lambda_at(double gamma) const;
  /// log lambda_at(exp(log_gamma)) without the round trip through exp.
  double log_lambda_at_log(double log_gamma) const;
  /// q_correction from the interpolant's log-log slope.
  double q_at(double gamma) const;

  void write_csv(std::ostream& os) const;

private:
  ProfileSpec profile_;
  Eigen::VectorXd gamma_, lambda_, lambda_prime_, q_;
  Eigen::VectorXd log_gamma_, log_lambda_, slope_;
  double lambda0_ = 0;
  double h_ = 0;

  std::pair<int, double> locate(double gamma) const;
  std::pair<int, double> locate_log(double log_gamma) const;
};

struct QStar {
  double value;
  double argmax;
  double error_bound;
};

/// Supremum of q_correction over (0, 1]: grid argmax of the table, then
/// golden-section refinement in log gamma to a 1e-4 bracket.
QStar q_star(const CoefficientTable& table, const QuadratureSettings& q = {});
QStar q_star(const ProfileSpec& p, int points = CoefficientTable::kDefaultPoints,
             const QuadratureSettings& q = {});

}  // namespace ringcascade

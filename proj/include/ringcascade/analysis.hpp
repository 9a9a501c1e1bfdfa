#pragma once

#include "ringcascade/cascade.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ringcascade {

/// (2/5)(1 - alpha) - alpha.
double flattened_exponent(double alpha);

/// 2 / (7 - q_star); throws std::invalid_argument unless 0 <= q_star < 5.
double frozen_decay_threshold(double q_star);

/// Comparison constants for multiplicative perturbations of size mu.
double comparison_lower(double mu);  // (1-mu)^3 / (1+mu)^5
double comparison_upper(double mu);  // (1+mu)^3 / (1-mu)^5
double comparison_ratio(double mu);  // upper / lower = ((1+mu)/(1-mu))^8

struct AlphaRange {
  double lo, hi;
  bool empty() const { return !(lo < hi); }
  double midpoint() const { return 0.5 * (lo + hi); }
};

/// lo = 1/q, hi = log(L/zeta_eta) / (3 theta + log(L/zeta_eta)).
AlphaRange admissible_alpha_range(double L, double theta, double q, double eta = 0.25);

/// zeta_eta * exp((1 + margin) 3 theta / (q - 1)); margin must be > 0.
double choose_cone_slope(double q, double theta, double margin, double eta = 0.25);

struct BetaExponent {
  double gamma;
  double beta;
  /// Upper bound on the log-log slope of t_N against m: -(1 + gamma) beta.
  double slope_bound() const { return -(1 + gamma) * beta; }
};

BetaExponent beta_exponent(double L, double alpha, double theta, double eta = 0.25);

struct RiccatiParams {
  double rate = 2.5;
  double lambda_star = 1;
};

struct RiccatiBounds {
  double lower, upper;
};

/// lower = 1/(rate t + 1/S0);
/// upper = lambda*/(1 - (1 - lambda*/S0) exp(-rate lambda* t)).
RiccatiBounds riccati_oracles(double S0, double t, const RiccatiParams& params = {});

/// p_* = 3 log(1/d) / (log A + log(1/d)).
double cmz_threshold(double A, double d);

struct ThresholdReport {
  double alpha = 0;
  ModelKind model = ModelKind::Flattened;
  double t = 0;
  double fitted_exponent = 0;
  double predicted_exponent = 0;  // NaN when the model has no closed form
  int k_min = 0, k_max = 0;
  double residual = 0;
};

/// OLS fit of log x_k(t) against log k on the dyadic grid k_min 2^i <= k_max.
/// Requires a sample at t and k_max >= 8 k_min.
ThresholdReport fit_tail_exponent(const CascadeTrajectory& traj, double t, int k_min, int k_max);

struct ScalingReport {
  std::vector<int> m_values;
  std::vector<double> t_N_values;  // NaN where a run did not inflate
  std::vector<std::string> statuses;
  double fitted_slope = 0;
  double beta = 0;
  double gamma = 0;
  double beta_bound = 0;  // -(1 + gamma) beta
  bool strictly_decreasing = false;
  bool bound_holds = false;  // t_N(m) <= t_N(m0) (m/m0)^{-beta}
};

/// Runs run_until_inflation for each m (concurrently, up to `workers`
/// threads) and checks the one-sided bound. beta and gamma come from
/// beta_exponent(L, alpha, theta) with the template's L and eta.
ScalingReport tn_scaling_experiment(const CascadeRun& tmpl, const std::vector<int>& m_list,
                                    double theta = 1, int workers = 1);

struct FrontSample {
  double t;
  bool checked;   // zeta_m(t) < zeta_eta
  double margin;  // S_{m-1}(t) 3 theta t / log(L/zeta_eta); NaN if not checked
};

struct FrontBoundReport {
  std::vector<FrontSample> samples;
  int checked = 0;
  int violations = 0;
  double min_margin = 0;  // over checked samples
};

FrontBoundReport front_bound_check(const CascadeTrajectory& traj, double theta = 1);

struct RiccatiCheck {
  long comparisons = 0;
  long violations = 0;
  double worst_lower_ratio = 0;  // min S / lower
  double worst_upper_ratio = 0;  // max S / upper
};

/// Compares every S_k(t) on every sample of a Flattened trajectory against
/// the Riccati oracles. rel_slack absorbs rounding at fixed points.
RiccatiCheck riccati_check(const CascadeTrajectory& traj, double rel_slack = 1e-12);

struct MonotonicityCheck {
  long comparisons = 0;
  long violations = 0;
  double worst_drop = 0;  // largest relative decrease observed
};

/// b_j(t_{i+1}) >= b_j(t_i) (1 - slack) whenever zeta_j(t_{i+1}) >= zeta_eta.
MonotonicityCheck productive_window_check(const CascadeTrajectory& traj, double slack = 1e-9);

/// Largest |cascade residual| over all samples.
double max_cascade_residual(const CascadeTrajectory& traj);

nlohmann::json to_json(const ThresholdReport& r);
nlohmann::json to_json(const ScalingReport& r);
nlohmann::json to_json(const FrontBoundReport& r);
void write_text(std::ostream& os, const std::vector<ThresholdReport>& rows);
void write_text(std::ostream& os, const ScalingReport& r);

}  // namespace ringcascade

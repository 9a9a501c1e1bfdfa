#pragma once

#include "ringcascade/profile.hpp"

#include <Eigen/Dense>

#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ringcascade {

enum class ModelKind { Strong, Flattened, Frozen, Localized };

std::string_view to_string(ModelKind k);
/// Case-insensitive; throws std::invalid_argument for unknown names.
ModelKind parse_model_kind(std::string_view name);

/// Which stretching coefficient b_j drives the cascade.
///
/// L and eta define the cone variable zeta = L * gamma and the productive
/// threshold for every model; for Frozen they come from the table's profile.
struct CascadeModel {
  ModelKind kind = ModelKind::Flattened;
  std::shared_ptr<const CoefficientTable> table;  // Frozen only
  double L = 50;
  double eta = 0.25;
  double r0 = 1;
  double weight = 1;  // Localized: multiplies x_j(0) L^{-2/3} r0^{-2} psi(zeta_j)

  static CascadeModel strong(double L = 50, double eta = 0.25);
  static CascadeModel flattened(double L = 50, double eta = 0.25);
  static CascadeModel frozen(std::shared_ptr<const CoefficientTable> table);
  static CascadeModel localized(double L, double eta = 0.25, double r0 = 1, double weight = 1);

  double zeta_threshold() const { return productive_threshold(eta); }
};

/// Piecewise-constant multiplicative factors on b_j. factors[i] applies on
/// [breakpoints[i-1], breakpoints[i]) (with breakpoints[-1] = 0 and the last
/// piece open-ended). Each factor vector holds either one entry for all rings
/// or one entry per ring.
struct Perturbation {
  std::vector<double> breakpoints;
  std::vector<std::vector<double>> factors;

  int segment_at(double t) const;
  double factor(int segment, int ring) const;
  void validate(int m) const;
};

struct IntegratorSettings {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = std::numeric_limits<double>::infinity();
};

struct CascadeRun {
  CascadeModel model;
  double eps = 1;
  double alpha = 0.2;
  int m = 2;
  double target_A = 10;
  double mu = 0.05;
  double t_max = 1;
  IntegratorSettings integrator;
  std::optional<Perturbation> perturbation;
  /// Samples at these times (sorted, within [0, t_max]). When empty, every
  /// sample_stride-th accepted step is recorded.
  std::vector<double> output_times;
  int sample_stride = 1;
  bool stop_at_inflation = false;

  double inflation_level() const { return target_A / (1 - mu); }
  double initial_amplitude(int k) const;  // k is 1-based
  void validate() const;
};

struct CascadeState {
  double t = 0;
  Eigen::VectorXd logx;
  Eigen::VectorXd B;

  static CascadeState initial(const CascadeRun& run);
  int size() const { return static_cast<int>(logx.size()); }
};

struct Diagnostics {
  Eigen::VectorXd gamma, zeta, b;
  Eigen::VectorXd S;  // S(k-1) = b_1 + ... + b_k
  std::optional<int> front_index;  // 1-based
  Eigen::VectorXd cascade_residual;  // m - 1 entries
};

struct Events {
  std::optional<double> t_N;
  std::optional<double> t_front_hit;
};

enum class RunStatus { Completed, Inflated };

struct CascadeTrajectory {
  CascadeRun run;
  std::vector<CascadeState> samples;
  Events events;
  RunStatus status = RunStatus::Completed;
  long steps = 0;
  long rejected = 0;
  long rhs_evaluations = 0;
};

/// Step-size collapse; carries the last accepted state.
class IntegrationError : public std::runtime_error {
public:
  IntegrationError(const std::string& what, CascadeState last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const CascadeState& last_state() const { return last_; }

private:
  CascadeState last_;
};

/// b_k for 1 <= k <= m. For Localized, also evaluates x_k gamma_k^2
/// lambda_localized(gamma_k) and throws std::logic_error if the two forms
/// disagree beyond rounding.
double b_coefficient(const CascadeRun& run, int k, const CascadeState& state, int segment = 0);

/// All b_j at once; uses the perturbation segment given.
void b_all(const CascadeRun& run, const Eigen::VectorXd& logx, int segment, Eigen::VectorXd& b);

/// Time derivative of (logx, B), stacked.
Eigen::VectorXd rhs(const CascadeRun& run, const CascadeState& state);

CascadeTrajectory integrate(const CascadeRun& run);

Diagnostics diagnostics(const CascadeState& state, const CascadeRun& run);

struct InflationResult {
  std::optional<double> t_N;
  CascadeTrajectory trajectory;
  bool inflated() const { return t_N.has_value(); }
};

/// Integrates until max_k x_k reaches A / (1 - mu) or t_max. Reaching t_max
/// first is reported through an empty t_N, not an exception.
InflationResult run_until_inflation(CascadeRun run);

}  // namespace ringcascade

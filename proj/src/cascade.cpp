#include "ringcascade/cascade.hpp"

#include "ringcascade/ode.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace ringcascade {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Strong: return "strong";
    case ModelKind::Flattened: return "flattened";
    case ModelKind::Frozen: return "frozen";
    case ModelKind::Localized: return "localized";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "strong") return ModelKind::Strong;
  if (s == "flattened") return ModelKind::Flattened;
  if (s == "frozen") return ModelKind::Frozen;
  if (s == "localized") return ModelKind::Localized;
  throw std::invalid_argument("unknown model '" + std::string(name) + "'");
}

CascadeModel CascadeModel::strong(double L, double eta) {
  return {ModelKind::Strong, nullptr, L, eta, 1, 1};
}

CascadeModel CascadeModel::flattened(double L, double eta) {
  return {ModelKind::Flattened, nullptr, L, eta, 1, 1};
}

CascadeModel CascadeModel::frozen(std::shared_ptr<const CoefficientTable> table) {
  if (!table) throw std::invalid_argument("frozen model needs a coefficient table");
  const auto& p = table->profile();
  return {ModelKind::Frozen, std::move(table), p.L, p.eta, p.r0, 1};
}

CascadeModel CascadeModel::localized(double L, double eta, double r0, double weight) {
  return {ModelKind::Localized, nullptr, L, eta, r0, weight};
}

int Perturbation::segment_at(double t) const {
  return static_cast<int>(std::upper_bound(breakpoints.begin(), breakpoints.end(), t) -
                          breakpoints.begin());
}

double Perturbation::factor(int segment, int ring) const {
  const auto& f = factors[static_cast<std::size_t>(segment)];
  return f.size() == 1 ? f[0] : f[static_cast<std::size_t>(ring)];
}

void Perturbation::validate(int m) const {
  if (factors.size() != breakpoints.size() + 1)
    throw std::invalid_argument("perturbation: need one factor set per segment");
  for (std::size_t i = 0; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i] > 0) || (i > 0 && !(breakpoints[i] > breakpoints[i - 1])))
      throw std::invalid_argument("perturbation: breakpoints must be positive and increasing");
  }
  for (const auto& f : factors) {
    if (f.size() != 1 && f.size() != static_cast<std::size_t>(m))
      throw std::invalid_argument("perturbation: factor set must have 1 or m entries");
    for (double v : f)
      if (!(v > 0)) throw std::invalid_argument("perturbation: factors must be positive");
  }
}

double CascadeRun::initial_amplitude(int k) const { return eps * std::pow(double(k), -alpha); }

void CascadeRun::validate() const {
  if (!(eps > 0)) throw std::invalid_argument("run: eps must be positive");
  if (!(alpha >= 0 && alpha < 1)) throw std::invalid_argument("run: alpha must lie in [0,1)");
  if (m < 2) throw std::invalid_argument("run: m must be >= 2");
  if (!(target_A > 0)) throw std::invalid_argument("run: A must be positive");
  if (!(mu > 0 && mu < 1)) throw std::invalid_argument("run: mu must lie in (0,1)");
  if (!(t_max > 0)) throw std::invalid_argument("run: t_max must be positive");
  if (!(integrator.rel_tol > 0) || !(integrator.abs_tol >= 0) || !(integrator.max_step > 0))
    throw std::invalid_argument("run: invalid integrator settings");
  if (model.kind == ModelKind::Frozen && !model.table)
    throw std::invalid_argument("run: frozen model needs a coefficient table");
  if (!(model.L > 0) || !(model.eta > 0 && model.eta < 1))
    throw std::invalid_argument("run: model needs L > 0 and eta in (0,1)");
  if (!std::is_sorted(output_times.begin(), output_times.end()))
    throw std::invalid_argument("run: output_times must be sorted");
  if (sample_stride < 1) throw std::invalid_argument("run: sample_stride must be >= 1");
  if (perturbation) perturbation->validate(m);
}

CascadeState CascadeState::initial(const CascadeRun& run) {
  CascadeState s;
  s.logx.resize(run.m);
  s.B = Eigen::VectorXd::Zero(run.m);
  for (int k = 1; k <= run.m; ++k) s.logx(k - 1) = std::log(run.initial_amplitude(k));
  return s;
}

namespace {

Eigen::VectorXd initial_logx(const CascadeRun& run) { return CascadeState::initial(run).logx; }

// log b_j given log x_j and log x_j(0); the perturbation factor is applied by
// the caller.
struct LogCoefficient {
  ModelKind kind;
  const CoefficientTable* table;
  double log_L;
  double localized_shift;  // log(weight) - (2/3) log L - 2 log r0

  explicit LogCoefficient(const CascadeModel& m)
      : kind(m.kind), table(m.table.get()), log_L(std::log(m.L)),
        localized_shift(std::log(m.weight) - 2.0 / 3.0 * std::log(m.L) - 2 * std::log(m.r0)) {}

  double operator()(double lx, double lx0) const {
    const double lg = std::min(3 * (lx0 - lx), 0.0);
    switch (kind) {
      case ModelKind::Strong: return lx;
      case ModelKind::Flattened: return lx + 2 * lg;
      case ModelKind::Frozen: return lx + 2 * lg + table->log_lambda_at_log(lg);
      case ModelKind::Localized: {
        const double lz = log_L + lg;
        return lx0 + localized_shift + 5.0 / 3.0 * lz - 2.5 * std::log1p(std::exp(2 * lz));
      }
    }
    return 0;
  }
};

}  // namespace

void b_all(const CascadeRun& run, const Eigen::VectorXd& logx, int segment, Eigen::VectorXd& b) {
  const LogCoefficient coef(run.model);
  const Eigen::VectorXd lx0 = initial_logx(run);
  b.resize(run.m);
  for (int j = 0; j < run.m; ++j) {
    double v = std::exp(coef(logx(j), lx0(j)));
    if (run.perturbation) v *= run.perturbation->factor(segment, j);
    b(j) = v;
  }
}

double b_coefficient(const CascadeRun& run, int k, const CascadeState& state, int segment) {
  if (k < 1 || k > run.m) throw std::out_of_range("b_coefficient: k out of range");
  const LogCoefficient coef(run.model);
  const double lx = state.logx(k - 1);
  const double lx0 = std::log(run.initial_amplitude(k));
  double b = std::exp(coef(lx, lx0));
  if (run.model.kind == ModelKind::Localized) {
    const double gamma = std::exp(std::min(3 * (lx0 - lx), 0.0));
    const double alt = run.model.weight * std::exp(lx) * gamma * gamma *
                       lambda_localized(gamma, run.model.L, run.model.r0);
    if (std::abs(alt - b) > 1e-12 * std::max(std::abs(b), std::abs(alt)) + 1e-300)
      throw std::logic_error("b_coefficient: localized forms disagree");
  }
  if (run.perturbation) b *= run.perturbation->factor(segment, k - 1);
  return b;
}

namespace {

class CascadeRhs {
public:
  CascadeRhs(const CascadeRun& run, const int* segment)
      : run_(&run), coef_(run.model), lx0_(initial_logx(run)), segment_(segment) {}

  void operator()(double, const Eigen::VectorXd& y, Eigen::VectorXd& dy) const {
    const int m = run_->m;
    dy.resize(2 * m);
    double prefix = 0;
    const Perturbation* pert = run_->perturbation ? &*run_->perturbation : nullptr;
    for (int j = 0; j < m; ++j) {
      double b = std::exp(coef_(y(j), lx0_(j)));
      if (pert) b *= pert->factor(*segment_, j);
      dy(j) = prefix;
      dy(m + j) = b;
      prefix += b;
    }
  }

private:
  const CascadeRun* run_;
  LogCoefficient coef_;
  Eigen::VectorXd lx0_;
  const int* segment_;
};

CascadeState unpack(double t, const Eigen::VectorXd& y, int m) {
  return {t, y.head(m), y.tail(m)};
}

// Root of g on [a, b] with g(a) < 0 <= g(b), to 1e-10 relative in t.
template <class G>
double bisect(G&& g, double a, double b) {
  for (int it = 0; it < 200 && b - a > 1e-10 * std::max(std::abs(b), 1e-300); ++it) {
    const double c = 0.5 * (a + b);
    if (g(c) >= 0)
      b = c;
    else
      a = c;
  }
  return b;
}

}  // namespace

Eigen::VectorXd rhs(const CascadeRun& run, const CascadeState& state) {
  int segment = run.perturbation ? run.perturbation->segment_at(state.t) : 0;
  CascadeRhs f(run, &segment);
  Eigen::VectorXd y(2 * run.m), dy;
  y << state.logx, state.B;
  f(state.t, y, dy);
  return dy;
}

CascadeTrajectory integrate(const CascadeRun& run) {
  run.validate();
  const int m = run.m;
  CascadeTrajectory traj;
  traj.run = run;

  int segment = 0;
  CascadeRhs f(run, &segment);
  const CascadeState init = CascadeState::initial(run);
  Eigen::VectorXd y0(2 * m);
  y0 << init.logx, init.B;

  StepControl<double> ctl;
  ctl.rel_tol = run.integrator.rel_tol;
  ctl.abs_tol = run.integrator.abs_tol;
  ctl.max_step = run.integrator.max_step;
  DormandPrince54<double> stepper(f, 0.0, y0, ctl);

  const double log_level = std::log(run.inflation_level());
  // zeta_m < threshold  <=>  log x_m - log x_m(0) > log(L / threshold) / 3
  const double hit_level = std::log(run.model.L / run.model.zeta_threshold()) / 3;
  const double lx0_m = init.logx(m - 1);
  auto inflation_gap = [&](const Eigen::VectorXd& y) { return y.head(m).maxCoeff() - log_level; };
  auto front_gap = [&](const Eigen::VectorXd& y) { return y(m - 1) - lx0_m - hit_level; };

  const bool explicit_times = !run.output_times.empty();
  std::size_t next_out = 0;
  auto emit_until = [&](double t_hi, bool inclusive) {
    while (next_out < run.output_times.size() &&
           (run.output_times[next_out] < t_hi ||
            (inclusive && run.output_times[next_out] == t_hi))) {
      const double ts = run.output_times[next_out++];
      if (ts == stepper.t())
        traj.samples.push_back(unpack(ts, stepper.y(), m));
      else
        traj.samples.push_back(unpack(ts, stepper.interpolate(ts), m));
    }
  };

  if (explicit_times) {
    while (next_out < run.output_times.size() && run.output_times[next_out] <= 0) {
      traj.samples.push_back(unpack(0.0, y0, m));
      ++next_out;
    }
  } else {
    traj.samples.push_back(unpack(0.0, y0, m));
  }

  if (inflation_gap(y0) >= 0) {
    traj.events.t_N = 0.0;
    if (run.stop_at_inflation) {
      traj.status = RunStatus::Inflated;
      return traj;
    }
  }
  if (front_gap(y0) > 0) traj.events.t_front_hit = 0.0;

  const std::vector<double> no_breaks;
  const auto& breaks = run.perturbation ? run.perturbation->breakpoints : no_breaks;
  long accepted = 0;
  bool stop = false;
  while (!stop && stepper.t() < run.t_max) {
    const double t_limit =
        segment < static_cast<int>(breaks.size()) ? std::min(breaks[segment], run.t_max)
                                                  : run.t_max;
    if (!stepper.step(t_limit)) {
      throw IntegrationError("integrate: step size underflow at t=" + std::to_string(stepper.t()),
                             unpack(stepper.t(), stepper.y(), m));
    }
    ++accepted;
    const double t0 = stepper.t_prev(), t1 = stepper.t();
    const Eigen::VectorXd& y1 = stepper.y();

    if (!traj.events.t_front_hit && front_gap(y1) > 0) {
      traj.events.t_front_hit =
          bisect([&](double t) { return front_gap(stepper.interpolate(t)) > 0 ? 1.0 : -1.0; },
                 t0, t1);
    }
    std::optional<double> t_stop;
    if (!traj.events.t_N && inflation_gap(y1) >= 0) {
      const double tn =
          t1 == t0 ? t1
                   : bisect([&](double t) { return inflation_gap(stepper.interpolate(t)); }, t0, t1);
      traj.events.t_N = tn;
      if (run.stop_at_inflation) t_stop = tn;
    }

    if (t_stop) {
      if (explicit_times) emit_until(*t_stop, false);
      traj.samples.push_back(unpack(*t_stop, stepper.interpolate(*t_stop), m));
      traj.status = RunStatus::Inflated;
      stop = true;
    } else if (explicit_times) {
      emit_until(t1, true);
    } else if (accepted % run.sample_stride == 0 || t1 >= run.t_max) {
      traj.samples.push_back(unpack(t1, y1, m));
    }

    if (segment < static_cast<int>(breaks.size()) && t1 == breaks[segment]) {
      ++segment;
      stepper.restart();
    }
  }
  if (traj.events.t_N) traj.status = RunStatus::Inflated;
  traj.steps = stepper.steps();
  traj.rejected = stepper.rejected();
  traj.rhs_evaluations = stepper.evaluations();
  return traj;
}

Diagnostics diagnostics(const CascadeState& state, const CascadeRun& run) {
  const int m = state.size();
  Diagnostics d;
  d.gamma.resize(m);
  d.zeta.resize(m);
  d.S.resize(m);
  const int segment = run.perturbation ? run.perturbation->segment_at(state.t) : 0;
  b_all(run, state.logx, segment, d.b);
  double prefix = 0;
  for (int k = 1; k <= m; ++k) {
    const double lg = 3 * (std::log(run.initial_amplitude(k)) - state.logx(k - 1));
    d.gamma(k - 1) = std::exp(lg);
    d.zeta(k - 1) = run.model.L * d.gamma(k - 1);
    prefix += d.b(k - 1);
    d.S(k - 1) = prefix;
  }
  d.cascade_residual.resize(m - 1);
  for (int j = 1; j <= m - 1; ++j) {
    const double lg_j = 3 * (std::log(run.initial_amplitude(j)) - state.logx(j - 1));
    const double lg_n = 3 * (std::log(run.initial_amplitude(j + 1)) - state.logx(j));
    d.cascade_residual(j - 1) = lg_n - lg_j + 3 * state.B(j - 1);
  }
  const double thr = run.model.zeta_threshold();
  for (int j = m - 1; j >= 1; --j) {
    if (d.zeta(j - 1) >= thr) {
      d.front_index = j;
      break;
    }
  }
  return d;
}

InflationResult run_until_inflation(CascadeRun run) {
  if (!(run.target_A > run.eps))
    throw std::invalid_argument("run_until_inflation: A must exceed eps");
  run.stop_at_inflation = true;
  InflationResult out;
  out.trajectory = integrate(run);
  out.t_N = out.trajectory.events.t_N;
  return out;
}

}  // namespace ringcascade

#include "ringcascade/analysis.hpp"

#include "ringcascade/format.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace ringcascade {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Slope and intercept of the least-squares line through (x_i, y_i).
std::pair<double, double> ols(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd A(x.size(), 2);
  A.col(0) = x;
  A.col(1).setOnes();
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
  return {c(0), c(1)};
}

}  // namespace

double flattened_exponent(double alpha) { return 0.4 * (1 - alpha) - alpha; }

double frozen_decay_threshold(double q_star) {
  if (!(q_star >= 0 && q_star < 5))
    throw std::invalid_argument("frozen_decay_threshold: need 0 <= q_star < 5");
  return 2 / (7 - q_star);
}

double comparison_lower(double mu) { return std::pow(1 - mu, 3) / std::pow(1 + mu, 5); }
double comparison_upper(double mu) { return std::pow(1 + mu, 3) / std::pow(1 - mu, 5); }
double comparison_ratio(double mu) { return std::pow((1 + mu) / (1 - mu), 8); }

AlphaRange admissible_alpha_range(double L, double theta, double q, double eta) {
  const double zeta = productive_threshold(eta);
  if (!(L > zeta)) throw std::invalid_argument("admissible_alpha_range: need L > zeta_eta");
  if (!(theta >= 1) || !(q > 1)) throw std::invalid_argument("admissible_alpha_range: theta >= 1, q > 1");
  const double ell = std::log(L / zeta);
  return {1 / q, ell / (3 * theta + ell)};
}

double choose_cone_slope(double q, double theta, double margin, double eta) {
  if (!(q > 1) || !(theta >= 1) || !(margin > 0))
    throw std::invalid_argument("choose_cone_slope: need q > 1, theta >= 1, margin > 0");
  return productive_threshold(eta) * std::exp((1 + margin) * 3 * theta / (q - 1));
}

BetaExponent beta_exponent(double L, double alpha, double theta, double eta) {
  const double zeta = productive_threshold(eta);
  if (!(L > zeta)) throw std::invalid_argument("beta_exponent: need L > zeta_eta");
  const double gamma = 3 * theta / std::log(L / zeta);
  return {gamma, 1 / (1 + gamma) - alpha};
}

RiccatiBounds riccati_oracles(double S0, double t, const RiccatiParams& p) {
  if (!(S0 > 0) || !(t >= 0)) throw std::invalid_argument("riccati_oracles: S0 > 0, t >= 0");
  const double lower = 1 / (p.rate * t + 1 / S0);
  const double ls = p.lambda_star;
  const double upper = ls / (1 - (1 - ls / S0) * std::exp(-p.rate * ls * t));
  return {lower, upper};
}

double cmz_threshold(double A, double d) {
  if (!(A > 1) || !(d > 0 && d < 1)) throw std::invalid_argument("cmz_threshold: A > 1, 0 < d < 1");
  const double l = std::log(1 / d);
  return 3 * l / (std::log(A) + l);
}

namespace {
const CascadeState& sample_at(const CascadeTrajectory& traj, double t) {
  for (const auto& s : traj.samples)
    if (std::abs(s.t - t) <= 1e-12 * std::max(1.0, std::abs(t))) return s;
  throw std::invalid_argument("trajectory has no sample at t=" + fmt17(t));
}
}  // namespace

ThresholdReport fit_tail_exponent(const CascadeTrajectory& traj, double t, int k_min, int k_max) {
  const int m = traj.run.m;
  if (k_min < 2 || k_max > m || k_max < 8 * k_min)
    throw std::invalid_argument("fit_tail_exponent: need 2 <= k_min, 8 k_min <= k_max <= m");
  const auto& s = sample_at(traj, t);
  std::vector<int> ks;
  for (long k = k_min; k <= k_max; k *= 2) ks.push_back(static_cast<int>(k));
  Eigen::VectorXd x(ks.size()), y(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) {
    x(i) = std::log(double(ks[i]));
    y(i) = s.logx(ks[i] - 1);
  }
  const auto [slope, icept] = ols(x, y);
  ThresholdReport r;
  r.alpha = traj.run.alpha;
  r.model = traj.run.model.kind;
  r.t = t;
  r.fitted_exponent = slope;
  r.predicted_exponent =
      traj.run.model.kind == ModelKind::Flattened ? flattened_exponent(r.alpha) : kNaN;
  r.k_min = ks.front();
  r.k_max = ks.back();
  r.residual = (y.array() - (slope * x.array() + icept)).abs().maxCoeff();
  return r;
}

ScalingReport tn_scaling_experiment(const CascadeRun& tmpl, const std::vector<int>& m_list,
                                    double theta, int workers) {
  if (m_list.size() < 2) throw std::invalid_argument("tn_scaling_experiment: need >= 2 values of m");
  ScalingReport rep;
  rep.m_values = m_list;
  rep.t_N_values.assign(m_list.size(), kNaN);
  rep.statuses.assign(m_list.size(), "pending");
  const auto be = beta_exponent(tmpl.model.L, tmpl.alpha, theta, tmpl.model.eta);
  rep.beta = be.beta;
  rep.gamma = be.gamma;
  rep.beta_bound = be.slope_bound();

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < m_list.size();) {
      CascadeRun run = tmpl;
      run.m = m_list[i];
      run.output_times.clear();
      run.sample_stride = std::numeric_limits<int>::max();
      try {
        const auto res = run_until_inflation(run);
        if (res.t_N) {
          rep.t_N_values[i] = *res.t_N;
          rep.statuses[i] = "inflated";
        } else {
          rep.statuses[i] = "no-inflation";
        }
      } catch (const std::exception& e) {
        rep.statuses[i] = std::string("error: ") + e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(m_list.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < m_list.size(); ++i) {
    if (std::isfinite(rep.t_N_values[i])) {
      lx.push_back(std::log(double(m_list[i])));
      ly.push_back(std::log(rep.t_N_values[i]));
    }
  }
  if (lx.size() >= 2) {
    rep.fitted_slope =
        ols(Eigen::Map<Eigen::VectorXd>(lx.data(), lx.size()),
            Eigen::Map<Eigen::VectorXd>(ly.data(), ly.size()))
            .first;
  } else {
    rep.fitted_slope = kNaN;
  }
  const bool all = lx.size() == m_list.size();
  rep.strictly_decreasing = all;
  rep.bound_holds = all;
  if (all) {
    const double t0 = rep.t_N_values[0], m0 = m_list[0];
    for (std::size_t i = 1; i < m_list.size(); ++i) {
      if (!(rep.t_N_values[i] < rep.t_N_values[i - 1])) rep.strictly_decreasing = false;
      if (!(rep.t_N_values[i] <= t0 * std::pow(m_list[i] / m0, -rep.beta)))
        rep.bound_holds = false;
    }
  }
  return rep;
}

FrontBoundReport front_bound_check(const CascadeTrajectory& traj, double theta) {
  const auto& run = traj.run;
  const int m = run.m;
  const double thr = run.model.zeta_threshold();
  const double ell = std::log(run.model.L / thr);
  FrontBoundReport rep;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& s : traj.samples) {
    const auto d = diagnostics(s, run);
    FrontSample fs{s.t, false, kNaN};
    if (d.zeta(m - 1) < thr && s.t > 0) {
      fs.checked = true;
      fs.margin = d.S(m - 2) * 3 * theta * s.t / ell;
      ++rep.checked;
      if (fs.margin < 1) ++rep.violations;
      rep.min_margin = std::min(rep.min_margin, fs.margin);
    }
    rep.samples.push_back(fs);
  }
  if (rep.checked == 0) rep.min_margin = kNaN;
  return rep;
}

RiccatiCheck riccati_check(const CascadeTrajectory& traj, double rel_slack) {
  const auto& run = traj.run;
  if (run.model.kind != ModelKind::Flattened)
    throw std::invalid_argument("riccati_check: flattened trajectories only");
  if (run.eps > 1) throw std::invalid_argument("riccati_check: needs eps <= 1");
  RiccatiCheck out;
  out.worst_lower_ratio = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd S0 = diagnostics(CascadeState::initial(run), run).S;
  for (const auto& s : traj.samples) {
    const Eigen::VectorXd S = diagnostics(s, run).S;
    for (Eigen::Index k = 0; k < S.size(); ++k) {
      const auto rb = riccati_oracles(S0(k), s.t);
      ++out.comparisons;
      if (S(k) < rb.lower * (1 - rel_slack) || S(k) > rb.upper * (1 + rel_slack)) ++out.violations;
      out.worst_lower_ratio = std::min(out.worst_lower_ratio, S(k) / rb.lower);
      out.worst_upper_ratio = std::max(out.worst_upper_ratio, S(k) / rb.upper);
    }
  }
  return out;
}

MonotonicityCheck productive_window_check(const CascadeTrajectory& traj, double slack) {
  const auto& run = traj.run;
  const double thr = run.model.zeta_threshold();
  MonotonicityCheck out;
  if (traj.samples.size() < 2) return out;
  Diagnostics prev = diagnostics(traj.samples.front(), run);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    Diagnostics cur = diagnostics(traj.samples[i], run);
    for (Eigen::Index j = 0; j < cur.b.size(); ++j) {
      if (cur.zeta(j) < thr) continue;
      ++out.comparisons;
      const double drop = (prev.b(j) - cur.b(j)) / prev.b(j);
      out.worst_drop = std::max(out.worst_drop, drop);
      if (drop > slack) ++out.violations;
    }
    prev = std::move(cur);
  }
  return out;
}

double max_cascade_residual(const CascadeTrajectory& traj) {
  double worst = 0;
  for (const auto& s : traj.samples)
    worst = std::max(worst, diagnostics(s, traj.run).cascade_residual.cwiseAbs().maxCoeff());
  return worst;
}

namespace {
nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}
}  // namespace

nlohmann::json to_json(const ThresholdReport& r) {
  return {{"alpha", r.alpha},
          {"model", std::string(to_string(r.model))},
          {"t", r.t},
          {"fitted_exponent", num(r.fitted_exponent)},
          {"predicted_exponent", num(r.predicted_exponent)},
          {"fit_range", {r.k_min, r.k_max}},
          {"residual", num(r.residual)}};
}

nlohmann::json to_json(const ScalingReport& r) {
  nlohmann::json tn = nlohmann::json::array();
  for (double v : r.t_N_values) tn.push_back(num(v));
  return {{"m_values", r.m_values},
          {"t_N_values", tn},
          {"statuses", r.statuses},
          {"fitted_slope", num(r.fitted_slope)},
          {"beta", r.beta},
          {"gamma", r.gamma},
          {"beta_bound", r.beta_bound},
          {"strictly_decreasing", r.strictly_decreasing},
          {"bound_holds", r.bound_holds}};
}

nlohmann::json to_json(const FrontBoundReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.samples)
    samples.push_back({{"t", s.t}, {"checked", s.checked}, {"margin", num(s.margin)}});
  return {{"checked", r.checked},
          {"violations", r.violations},
          {"min_margin", num(r.min_margin)},
          {"samples", samples}};
}

void write_text(std::ostream& os, const std::vector<ThresholdReport>& rows) {
  os << fmt::format("{:>10} {:>10} {:>8} {:>14} {:>14} {:>12} {:>12}\n", "model", "alpha", "t",
                    "fitted", "predicted", "k-range", "residual");
  for (const auto& r : rows) {
    os << fmt::format("{:>10} {:>10.6f} {:>8.4g} {:>14.8f} {:>14.8f} {:>12} {:>12.3e}\n",
                      to_string(r.model), r.alpha, r.t, r.fitted_exponent, r.predicted_exponent,
                      fmt::format("{}-{}", r.k_min, r.k_max), r.residual);
  }
}

void write_text(std::ostream& os, const ScalingReport& r) {
  os << fmt::format("{:>8} {:>20} {:>14}\n", "m", "t_N", "status");
  for (std::size_t i = 0; i < r.m_values.size(); ++i)
    os << fmt::format("{:>8} {:>20.12g} {:>14}\n", r.m_values[i], r.t_N_values[i], r.statuses[i]);
  os << fmt::format("fitted slope {:.6f}  bound slope {:.6f}  beta {:.6f}  gamma {:.6f}\n",
                    r.fitted_slope, r.beta_bound, r.beta, r.gamma);
  os << fmt::format("strictly decreasing: {}  bound holds: {}\n", r.strictly_decreasing,
                    r.bound_holds);
}

}  // namespace ringcascade

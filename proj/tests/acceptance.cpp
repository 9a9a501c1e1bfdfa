// One pass/fail line per acceptance criterion; `acceptance <n>` runs criterion n.
#include "ringcascade/analysis.hpp"
#include "ringcascade/biotsavart.hpp"
#include "ringcascade/lorentz.hpp"

#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

using namespace ringcascade;

namespace {

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
    pass = pass && ok;
  }
};

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::shared_ptr<const CoefficientTable> table(double L, double eta, int points = 512) {
  return std::make_shared<const CoefficientTable>(
      CoefficientTable::build(make_profile(L, eta), points));
}

CascadeRun base_run(CascadeModel model, double eps, double alpha, int m, double A, double t_max) {
  CascadeRun r;
  r.model = std::move(model);
  r.eps = eps;
  r.alpha = alpha;
  r.m = m;
  r.target_A = A;
  r.t_max = t_max;
  return r;
}

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// Closed-form oracles at t = 1.
Verdict closed_forms() {
  Verdict v;
  {
    Stopwatch w;
    const double eps = 0.5;
    auto r = base_run(CascadeModel::strong(), eps, 0, 2, 1e300, 1);
    r.output_times = {1.0};
    const auto tr = integrate(r);
    const double x2 = std::exp(tr.samples.back().logx(1));
    const double e = rel_err(x2, eps * std::exp(eps));
    v.check(e <= 1e-8 && w.seconds() < 1,
            fmt::format("strong m=2 rel err {:.2e} in {:.3f}s", e, w.seconds()));
  }
  {
    Stopwatch w;
    const double eps = 1;
    auto r = base_run(CascadeModel::flattened(), eps, 0, 3, 1e300, 1);
    r.output_times = {1.0};
    const auto tr = integrate(r);
    const double x3 = std::exp(tr.samples.back().logx(2));
    const double exact = eps * std::exp(eps + eps * (1 - std::exp(-5 * eps)) / (5 * eps));
    const double e = rel_err(x3, exact);
    v.check(e <= 1e-8 && w.seconds() < 1,
            fmt::format("flattened m=3 rel err {:.2e} in {:.3f}s", e, w.seconds()));
  }
  {
    // Gamma_1 stays 1; the rate is checked against direct quadrature.
    Stopwatch w;
    const double eps = 1;
    const auto t = table(50, 0.25, 32);
    auto r = base_run(CascadeModel::frozen(t), eps, 0, 2, 1e300, 1);
    r.output_times = {1.0};
    const auto tr = integrate(r);
    const double x2 = std::exp(tr.samples.back().logx(1));
    const double lam1 = lambda_frozen(t->profile(), 1.0);
    const double e = rel_err(x2, eps * std::exp(eps * lam1));
    v.check(e <= 1e-8 && w.seconds() < 1,
            fmt::format("frozen m=2 rel err {:.2e} in {:.3f}s (table included)", e, w.seconds()));
  }
  return v;
}

Verdict cascade_identity() {
  Verdict v;
  Stopwatch w;
  const auto t = table(50, 0.25);
  for (auto model : {CascadeModel::frozen(t), CascadeModel::localized(50)}) {
    auto r = base_run(model, 1, 0.3, 1024, 10, 1e12);
    const auto res = run_until_inflation(r);
    const double resid = max_cascade_residual(res.trajectory);
    v.check(res.inflated() && resid <= 1e-7,
            fmt::format("{} m=1024 t_N {:.6g} residual {:.2e} over {} samples",
                        to_string(model.kind), res.t_N.value_or(NAN), resid,
                        res.trajectory.samples.size()));
  }
  v.check(w.seconds() < 30, fmt::format("{:.1f}s", w.seconds()));
  return v;
}

std::vector<CascadeRun> dichotomy_runs() {
  std::vector<CascadeRun> runs;
  for (double alpha : {0.2, 2.0 / 7.0, 0.4}) {
    auto r = base_run(CascadeModel::flattened(), 1, alpha, 4096, 1e300, 1);
    runs.push_back(r);
  }
  return runs;
}

Verdict flattened_dichotomy() {
  Verdict v;
  Stopwatch w;
  for (auto r : dichotomy_runs()) {
    r.output_times = {1.0};
    const auto tr = integrate(r);
    const auto fit = fit_tail_exponent(tr, 1.0, 512, 4096);
    v.check(std::abs(fit.fitted_exponent - fit.predicted_exponent) <= 0.05,
            fmt::format("alpha {:.4f} fitted {:+.4f} predicted {:+.4f}", r.alpha,
                        fit.fitted_exponent, fit.predicted_exponent));
  }
  v.check(w.seconds() < 120, fmt::format("{:.1f}s", w.seconds()));
  return v;
}

Verdict riccati_sandwich() {
  Verdict v;
  std::vector<CascadeRun> runs = dichotomy_runs();
  runs.push_back(base_run(CascadeModel::flattened(), 1, 0, 3, 1e300, 1));
  runs.push_back(base_run(CascadeModel::flattened(), 0.5, 0.2, 1024, 1e300, 4));
  long comparisons = 0, violations = 0;
  for (auto r : runs) {
    r.sample_stride = 1;
    const auto rc = riccati_check(integrate(r));
    comparisons += rc.comparisons;
    violations += rc.violations;
  }
  v.check(violations == 0, fmt::format("{} runs, {} comparisons, {} violations", runs.size(),
                                       comparisons, violations));
  return v;
}

Verdict productive_window() {
  Verdict v;
  const auto t = table(50, 0.25);
  const double zeta_eta = productive_threshold(0.25);
  v.check(std::abs(zeta_eta - 1.17851) < 5e-6, fmt::format("zeta_eta {:.6f}", zeta_eta));
  struct Case {
    double alpha;
    int m;
  };
  for (auto c : {Case{0.3, 1024}, Case{0.5, 256}, Case{0.1, 64}}) {
    auto r = base_run(CascadeModel::frozen(t), 1, c.alpha, c.m, 10, 1e12);
    r.sample_stride = 1;
    const auto res = run_until_inflation(r);
    const auto mc = productive_window_check(res.trajectory, 1e-9);
    v.check(mc.violations == 0 && mc.comparisons > 0,
            fmt::format("alpha {} m {}: {} comparisons, {} violations", c.alpha, c.m,
                        mc.comparisons, mc.violations));
  }
  return v;
}

Verdict front_migration() {
  Verdict v;
  Stopwatch w;
  auto r = base_run(CascadeModel::localized(50), 1, 0.5, 256, 10, 1e12);
  r.sample_stride = 1;
  const auto plain = run_until_inflation(r);
  const auto fb = front_bound_check(plain.trajectory, 1);
  v.check(fb.violations == 0 && fb.checked > 0,
          fmt::format("unperturbed: {} checked, min margin {:.3f}", fb.checked, fb.min_margin));
  const double mu = 0.05;
  const double lo = comparison_lower(mu), hi = comparison_upper(mu);
  const double theta = comparison_ratio(mu);
  const double t_hit = plain.trajectory.events.t_front_hit.value_or(1);
  // Worst cases: constant extremes and a switch at the unperturbed hit time.
  const std::vector<std::pair<std::string, Perturbation>> schedules = {
      {"c_mu", Perturbation{{}, {{lo}}}},
      {"C_mu", Perturbation{{}, {{hi}}}},
      {"C_mu then c_mu", Perturbation{{t_hit}, {{hi}, {lo}}}},
      {"c_mu then C_mu", Perturbation{{t_hit}, {{lo}, {hi}}}},
  };
  for (const auto& [name, pert] : schedules) {
    auto p = r;
    p.perturbation = pert;
    const auto res = run_until_inflation(p);
    const auto f = front_bound_check(res.trajectory, theta);
    v.check(f.violations == 0 && f.checked > 0,
            fmt::format("{}: {} checked, min margin {:.3f}", name, f.checked, f.min_margin));
  }
  v.check(w.seconds() < 30, fmt::format("{:.1f}s", w.seconds()));
  return v;
}

Verdict tn_scaling() {
  Verdict v;
  Stopwatch w;
  const double L = choose_cone_slope(2, 1, 0.5);
  const auto range = admissible_alpha_range(L, 1, 2);
  const double eps = 1;
  auto r = base_run(CascadeModel::frozen(table(L, 0.25)), eps, range.midpoint(), 64, 10 * eps,
                    1e300);
  const auto rep = tn_scaling_experiment(r, {64, 128, 256, 512, 1024, 2048}, 1, workers());
  std::string tn;
  for (double t : rep.t_N_values) tn += fmt::format(" {:.5g}", t);
  v.check(rep.strictly_decreasing, fmt::format("L {:.3f} alpha {:.3f} t_N:{}", L, r.alpha, tn));
  v.check(rep.bound_holds, fmt::format("bound with beta {:.4f}, fitted slope {:.4f}", rep.beta,
                                       rep.fitted_slope));
  v.check(w.seconds() < 300, fmt::format("{:.1f}s", w.seconds()));
  return v;
}

Verdict coefficient_sandwich() {
  Verdict v;
  for (auto [L, eta] : {std::pair{50.0, 0.25}, std::pair{5.0, 0.1}}) {
    const auto t = table(L, eta);
    long bad = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < t->size(); ++i) {
      const double g = t->gamma_grid()(i);
      const auto b = q_sandwich(t->profile(), g);
      const double q = t->q_corr()(i);
      if (!(b.lower <= q && q <= b.upper)) ++bad;
      worst = std::min({worst, q - b.lower, b.upper - q});
    }
    v.check(bad == 0, fmt::format("(L {}, eta {}): {} violations over {} nodes, min slack {:.2e}",
                                  L, eta, bad, t->size(), worst));
  }
  return v;
}

Verdict psi_critical_point() {
  Verdict v;
  const double z = 1 / std::sqrt(2.0), h = 1e-5;
  const double fd = (psi(z + h) - psi(z - h)) / (2 * h);
  v.check(std::abs(fd) <= 1e-6, fmt::format("FD psi'(1/sqrt2) = {:.2e}", fd));
  const int n = 10000;
  long bad = 0;
  double prev = psi(z);
  for (int i = 1; i <= n; ++i) {
    const double x = z * std::pow(100 / z, double(i) / n);
    const double p = psi(x);
    if (!(p < prev)) ++bad;
    prev = p;
  }
  v.check(bad == 0, fmt::format("{} non-decreasing steps on a {}-point grid", bad, n));
  return v;
}

std::vector<RingSnapshot> moment_snapshots() {
  const auto p = make_profile(50, 0.25);
  return {
      {{{1, 1, 1}}, p},
      {{{1, 1, 1}, {0.8, 1e-2, 1e-2}}, p},
      {{{1, 1, 0.5}, {0.7, 1e-2 * 1.3, 1e-2 / 1.69}}, p},
      {{{1, 1, 1}, {0.8, 1e-2, 1e-2}, {0.6, 1e-4, 1e-4}}, p},
      {{{0.5, 1, 0.2}}, p},
  };
}

Verdict moment_identity() {
  Verdict v;
  Stopwatch w;
  int index = 0;
  for (const auto& snap : moment_snapshots()) {
    const auto rate = origin_stretching_rate(snap);
    double r_min = std::numeric_limits<double>::infinity();
    for (const auto& g : snap.rings) r_min = std::min(r_min, g.R);
    const double h = 1e-3 * r_min;
    const double fd = velocity(snap, h, 0).u_r / h;
    const double e = rel_err(fd, rate.moment);
    v.check(e <= 1e-2 && rel_err(rate.rescaled, rate.moment) <= 1e-6,
            fmt::format("snapshot {}: FD rel err {:.1e}", ++index, e));
  }
  for (auto [rho, x] : {std::pair{0.1, 1.0}, std::pair{1.0, 1e3}, std::pair{1e-3, 2e-3}}) {
    const double q = annular_moment(rho, x);
    const double exact = 4 * std::numbers::pi / 3 * std::log(x / rho);
    const double e = rel_err(q, exact);
    v.check(e <= 1e-6, fmt::format("annulus {}..{} rel err {:.1e}", rho, x, e));
  }
  v.check(w.seconds() < 120, fmt::format("{:.1f}s", w.seconds()));
  return v;
}

RingSnapshot multiring(int n) {
  RingSnapshot s;
  s.profile = make_profile(50, 0.25);
  for (int k = 1; k <= n; ++k) {
    const double d = std::pow(kScaleRatio, k);
    s.rings.push_back({std::pow(double(k), -0.3), d, d});
  }
  return s;
}

Verdict outer_dominance() {
  Verdict v;
  // Points on the cone z = r at each ring radius; C is the largest ratio.
  std::vector<double> C;
  for (int n : {3, 6}) {
    const auto snap = multiring(n);
    double c = 0;
    for (const auto& g : snap.rings) {
      const double r = g.R, z = r;
      const auto res = prop21_residuals(snap, r, z);
      c = std::max(c, std::abs(res.E_r) / (std::hypot(r, z) / r * snap.omega_sup()));
    }
    C.push_back(c);
  }
  const double drift = std::abs(C[1] / C[0] - 1);
  v.check(drift <= 0.2, fmt::format("C(3 rings) {:.4e}, C(6 rings) {:.4e}, drift {:.1f}%", C[0],
                                    C[1], 100 * drift));
  const auto snap = multiring(4);
  const double r = snap.rings[1].R;
  std::vector<double> s, ez;
  for (int i = 1; i <= 8; ++i) {
    const double z = r * std::pow(10.0, -0.75 * i);
    s.push_back(r / z);
    ez.push_back(std::abs(prop21_residuals(snap, r, z).E_z));
  }
  const auto fit = fit_log_affine(s, ez);
  v.check(fit.residual <= 0.1, fmt::format("|E_z| log-affine residual {:.2e}, slope {:.2e}",
                                           fit.residual, fit.slope));
  return v;
}

Verdict lorentz_invariance() {
  Verdict v;
  MultiringConfig cfg;
  cfg.profile = make_profile(50, 0.25);
  cfg.eps = 1;
  cfg.alpha = 0.6;
  cfg.m = 6;
  const auto six = multiring_relative_vorticity_norm(cfg, 3, 2);
  std::vector<double> scaled;
  for (int k : {1, 3, 6})
    scaled.push_back(six.single_ring[k - 1] / (cfg.eps * std::pow(double(k), -cfg.alpha)));
  const double spread =
      std::max(rel_err(scaled[1], scaled[0]), rel_err(scaled[2], scaled[0]));
  v.check(spread <= 1e-3, fmt::format("single-ring k=1,3,6 spread {:.1e}", spread));

  const double q = 2;
  std::vector<double> ratios, conv, div;
  for (int m = 16; m <= 1024; m *= 2) {
    cfg.m = m;
    cfg.alpha = 0.6;
    const auto a = multiring_relative_vorticity_norm(cfg, 3, q);
    ratios.push_back(a.ratio());
    cfg.alpha = 0.4;
    div.push_back(multiring_relative_vorticity_norm(cfg, 3, q).norm);
  }
  bool stable = true;
  for (std::size_t i = 1; i < ratios.size(); ++i)
    stable = stable && rel_err(ratios[i], ratios[i - 1]) <= 1e-2;
  v.check(stable, fmt::format("l^q ratio {:.6f} .. {:.6f} over m = 16..1024",
                                         ratios.front(), ratios.back()));
  // alpha q = 0.8: the q-th power gains an ever larger amount per doubling.
  bool growing = true;
  for (std::size_t i = 2; i < div.size(); ++i) {
    const double prev = std::pow(div[i - 1], q) - std::pow(div[i - 2], q);
    const double next = std::pow(div[i], q) - std::pow(div[i - 1], q);
    growing = growing && next > prev && div[i] > div[i - 1];
  }
  v.check(growing, fmt::format("alpha q = 0.8 norm {:.3f} -> {:.3f}, increments growing",
                               div.front(), div.back()));
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria = {
      {1, {"closed-form oracles", closed_forms}},
      {2, {"cascade identity", cascade_identity}},
      {3, {"flattened dichotomy", flattened_dichotomy}},
      {4, {"Riccati sandwich", riccati_sandwich}},
      {5, {"productive-window monotonicity", productive_window}},
      {6, {"front-migration bound", front_migration}},
      {7, {"T_N scaling", tn_scaling}},
      {8, {"coefficient sandwich", coefficient_sandwich}},
      {9, {"Psi critical point", psi_critical_point}},
      {10, {"Biot-Savart moment identity", moment_identity}},
      {11, {"outer-region dominance scalings", outer_dominance}},
      {12, {"Lorentz per-ring invariance", lorentz_invariance}},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (const auto& [n, c] : criteria) which.push_back(n);
  bool all = true;
  for (int n : which) {
    const auto it = criteria.find(n);
    if (it == criteria.end()) {
      fmt::print("criterion {:2d} FAIL: unknown criterion\n", n);
      all = false;
      continue;
    }
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = fmt::format("exception: {}", e.what());
    }
    fmt::print("criterion {:2d} {} [{}]: {}\n", n, v.pass ? "PASS" : "FAIL", it->second.first,
               v.detail);
    all = all && v.pass;
  }
  return all ? 0 : 1;
}

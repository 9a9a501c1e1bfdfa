#include "ringcascade/analysis.hpp"
#include "ringcascade/biotsavart.hpp"
#include "ringcascade/format.hpp"
#include "ringcascade/io.hpp"
#include "ringcascade/lorentz.hpp"
#include "ringcascade/manifest.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <thread>

namespace fs = std::filesystem;
using namespace ringcascade;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

json opt(const std::optional<double>& v) { return v ? num(*v) : json(nullptr); }

void emit_error(std::string_view kind, const std::string& message, json extra = json::object()) {
  json e{{"kind", kind}, {"message", message}};
  e.update(extra);
  std::cerr << json{{"error", e}}.dump() << '\n';
}

fs::path prepare_dir(const Manifest& m) {
  const fs::path dir = resolve_output_dir(m);
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  fn(os);
}

// Flags that override manifest values when given.
struct Overrides {
  std::string model;
  double eps = 0, alpha = 0, A = 0, mu = 0, t = 0, L = 0, eta = 0, rel_tol = 0, q = 0;
  int m = 0, stride = 0, points = 0, workers = 0, grid = 0;
  bool stop = false;
  std::string out;
  std::multimap<std::string, CLI::Option*> given;

  void add(CLI::App* app, std::initializer_list<std::string_view> names) {
    for (auto n : names) {
      const std::string flag = "--" + std::string(n);
      CLI::Option* o = nullptr;
      if (n == "model") o = app->add_option(flag, model, "strong | flattened | frozen | localized");
      else if (n == "eps") o = app->add_option(flag, eps, "initial amplitude scale");
      else if (n == "alpha") o = app->add_option(flag, alpha, "amplitude decay exponent");
      else if (n == "m") o = app->add_option(flag, m, "number of rings");
      else if (n == "A") o = app->add_option(flag, A, "inflation target");
      else if (n == "mu") o = app->add_option(flag, mu, "target margin, level A/(1-mu)");
      else if (n == "t") o = app->add_option(flag, t, "final time");
      else if (n == "L") o = app->add_option(flag, L, "cone slope");
      else if (n == "eta") o = app->add_option(flag, eta, "localization half-width");
      else if (n == "rel-tol") o = app->add_option(flag, rel_tol, "integrator relative tolerance");
      else if (n == "stride") o = app->add_option(flag, stride, "record every n-th step");
      else if (n == "stop-at-inflation") o = app->add_flag(flag, stop, "stop at t_N");
      else if (n == "points") o = app->add_option(flag, points, "coefficient table points");
      else if (n == "workers") o = app->add_option(flag, workers, "concurrent runs");
      else if (n == "q") o = app->add_option(flag, q, "Lorentz second index");
      else if (n == "grid") o = app->add_option(flag, grid, "cells per direction per ring");
      else if (n == "out") o = app->add_option(flag, out, "output directory");
      given.emplace(std::string(n), o);
    }
  }

  bool has(const std::string& n) const {
    const auto [lo, hi] = given.equal_range(n);
    return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
  }

  void apply(Manifest& m) const {
    if (has("model")) m.model.kind = parse_model_kind(model);
    if (has("eps")) m.run.eps = m.lorentz.eps = eps;
    if (has("alpha")) m.run.alpha = m.lorentz.alpha = alpha;
    if (has("m")) m.run.m = m.lorentz.m = this->m;
    if (has("A")) m.run.A = A;
    if (has("mu")) m.run.mu = mu;
    if (has("t")) m.run.t_max = t;
    if (has("L")) m.model.L = L;
    if (has("eta")) m.model.eta = eta;
    if (has("rel-tol")) m.integrator.rel_tol = rel_tol;
    if (has("stride")) m.run.sample_stride = stride;
    if (has("stop-at-inflation")) m.run.stop_at_inflation = stop;
    if (has("points")) m.model.table_points = points;
    if (has("workers")) m.workers = workers;
    if (has("q")) m.lorentz.q = q;
    if (has("grid")) m.lorentz.grid = grid;
    if (has("out")) m.output_dir = out;
    m.validate();
  }
};

Manifest load_or_default(const std::string& path, ExperimentKind kind) {
  Manifest m;
  if (!path.empty()) {
    m = load_manifest(path);
  } else {
    m.kind = kind;
  }
  return m;
}

void require_kind(const Manifest& m, std::initializer_list<ExperimentKind> kinds) {
  for (auto k : kinds)
    if (m.kind == k) return;
  throw ManifestError("kind: '" + std::string(to_string(m.kind)) + "' not valid for this command",
                      "kind");
}

std::shared_ptr<const CoefficientTable> table_for(const Manifest& m, ModelKind kind, double L,
                                                  std::map<double, std::shared_ptr<const CoefficientTable>>& cache) {
  if (kind != ModelKind::Frozen) return nullptr;
  auto& t = cache[L];
  if (!t) {
    ModelConfig cfg = m.model;
    cfg.L = L;
    t = build_table(cfg);
  }
  return t;
}

int cmd_run(const Manifest& m) {
  std::map<double, std::shared_ptr<const CoefficientTable>> cache;
  const GridCell cell = base_cell(m);
  const CascadeRun run = make_run(m, cell, table_for(m, cell.model, cell.L, cache));
  const fs::path dir = prepare_dir(m);
  write_json(dir / "manifest.json", to_json(m));
  const CascadeTrajectory traj = integrate(run);
  write_file(dir / "trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj); });
  const json events = events_json(traj);
  write_json(dir / "events.json", events);
  std::cout << fmt::format("status {}  t_N {}  max residual {:.3e}  samples {}\n",
                           events["status"].get<std::string>(),
                           traj.events.t_N ? fmt17(*traj.events.t_N) : "-",
                           max_cascade_residual(traj), traj.samples.size());
  return 0;
}

// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <class Fn>
void fan_out(std::size_t n, int workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < n;) fn(i);
  };
  std::vector<std::thread> pool;
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  for (int k = 1; k < w; ++k) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

json cell_json(const GridCell& c) {
  return {{"model", std::string(to_string(c.model))}, {"L", c.L}, {"eps", c.eps},
          {"alpha", c.alpha}, {"A", c.A}, {"m", c.m}};
}

int cmd_sweep(const Manifest& m) {
  require_kind(m, {ExperimentKind::Sweep, ExperimentKind::Dichotomy, ExperimentKind::TnScaling});
  const auto cells = expand_grid(m);
  if (cells.empty()) throw ManifestError("sweep: empty grid", "sweep");
  std::map<double, std::shared_ptr<const CoefficientTable>> cache;
  for (const auto& c : cells) table_for(m, c.model, c.L, cache);
  const fs::path dir = prepare_dir(m);
  write_json(dir / "manifest.json", to_json(m));

  json report;
  if (m.kind == ExperimentKind::TnScaling) {
    // One scaling experiment per combination of the non-m axes.
    std::vector<GridCell> groups;
    for (const auto& c : cells) {
      const bool seen = std::any_of(groups.begin(), groups.end(), [&](const GridCell& g) {
        return g.model == c.model && g.L == c.L && g.eps == c.eps && g.alpha == c.alpha &&
               g.A == c.A;
      });
      if (!seen) groups.push_back(c);
    }
    report = json::array();
    std::ofstream text(dir / "report.txt");
    for (const auto& g : groups) {
      json entry = cell_json(g);
      entry.erase("m");
      try {
        CascadeRun tmpl = make_run(m, g, table_for(m, g.model, g.L, cache));
        const auto rep = tn_scaling_experiment(tmpl, m.sweep.m, m.sweep.theta, m.workers);
        entry["report"] = to_json(rep);
        write_text(text, rep);
      } catch (const std::exception& e) {
        entry["error"] = e.what();
      }
      report.push_back(entry);
    }
  } else {
    std::vector<json> rows(cells.size());
    std::vector<std::optional<ThresholdReport>> fits(cells.size());
    fan_out(cells.size(), m.workers, [&](std::size_t i) {
      const auto& c = cells[i];
      json row = cell_json(c);
      try {
        CascadeRun run = make_run(m, c, cache.count(c.L) ? cache.at(c.L) : nullptr);
        if (m.kind == ExperimentKind::Dichotomy) {
          run.t_max = m.sweep.fit_t;
          run.output_times = {m.sweep.fit_t};
          run.stop_at_inflation = false;
        } else {
          run.sample_stride = std::numeric_limits<int>::max();
        }
        const auto traj = integrate(run);
        row["status"] = traj.status == RunStatus::Inflated ? "inflated" : "completed";
        row["t_N"] = opt(traj.events.t_N);
        row["t_front_hit"] = opt(traj.events.t_front_hit);
        row["max_cascade_residual"] = num(max_cascade_residual(traj));
        if (m.kind == ExperimentKind::Dichotomy) {
          const int k_max = m.sweep.k_max > 0 ? m.sweep.k_max : c.m;
          const int k_min = m.sweep.k_min > 0 ? m.sweep.k_min : k_max / 8;
          const auto fit = fit_tail_exponent(traj, m.sweep.fit_t, k_min, k_max);
          row["fit"] = to_json(fit);
          fits[i] = fit;
        }
      } catch (const std::exception& e) {
        row["status"] = "error";
        row["error"] = e.what();
      }
      rows[i] = std::move(row);
    });
    report = rows;
    if (m.kind == ExperimentKind::Dichotomy) {
      std::vector<ThresholdReport> ok;
      for (const auto& f : fits)
        if (f) ok.push_back(*f);
      std::ofstream text(dir / "report.txt");
      write_text(text, ok);
    }
  }
  write_json(dir / "sweep.json", {{"kind", std::string(to_string(m.kind))}, {"cells", report}});
  std::cout << fmt::format("{} cells written to {}\n", report.size(), (dir / "sweep.json").string());
  return 0;
}

int cmd_coeffs(const Manifest& m) {
  const auto table = build_table(m.model);
  const fs::path dir = prepare_dir(m);
  write_json(dir / "manifest.json", to_json(m));
  write_file(dir / "coefficients.csv", [&](std::ostream& os) { table->write_csv(os); });
  QuadratureSettings q;
  q.rel_tol = m.model.quad_rel_tol;
  const auto qs = q_star(*table, q);
  const auto& p = table->profile();
  write_json(dir / "q_star.json",
             {{"q_star", qs.value},
              {"argmax_gamma", qs.argmax},
              {"error_bound", qs.error_bound},
              {"lambda_at_1", table->lambda()(table->lambda().size() - 1)},
              {"lambda_at_0", table->lambda_at_zero()},
              {"L", p.L},
              {"eta", p.eta},
              {"points", table->gamma_grid().size()}});
  std::cout << fmt::format("Q* = {} at gamma = {}\n", fmt17(qs.value), fmt17(qs.argmax));
  return 0;
}

int cmd_bs_check(const Manifest& m) {
  require_kind(m, {ExperimentKind::BsCheck});
  const ProfileSpec profile = make_profile(m.model.L, m.model.eta, m.model.r0);
  RingSnapshot snap;
  if (!m.snapshot.rings.empty()) {
    snap.rings = m.snapshot.rings;
    snap.profile = profile;
    snap.check_separation();
  } else {
    std::map<double, std::shared_ptr<const CoefficientTable>> cache;
    const GridCell cell = base_cell(m);
    CascadeRun run = make_run(m, cell, table_for(m, cell.model, cell.L, cache));
    run.t_max = std::max(m.snapshot.t, std::numeric_limits<double>::min());
    run.output_times = {m.snapshot.t};
    run.stop_at_inflation = false;
    const auto traj = integrate(run);
    snap = snapshot_from_state(traj.samples.back(), run, profile, m.snapshot.d);
  }
  const fs::path dir = prepare_dir(m);
  write_json(dir / "manifest.json", to_json(m));

  QuadratureSettings q;
  q.rel_tol = m.snapshot.velocity.tol;
  const auto rate = origin_stretching_rate(snap, q);
  double r_min = std::numeric_limits<double>::infinity();
  for (const auto& g : snap.rings) r_min = std::min(r_min, g.R * profile.r0);
  const double h = 1e-3 * r_min;
  const auto near = velocity(snap, h, 0, m.snapshot.velocity);
  const double fd = near.u_r / h;

  std::vector<Residuals> rows(m.snapshot.points.size());
  fan_out(rows.size(), m.workers, [&](std::size_t i) {
    const auto [r, z] = m.snapshot.points[i];
    if (r > 0 && z != 0) {
      rows[i] = prop21_residuals(snap, r, z, m.snapshot.velocity);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rows[i] = {nan, nan, velocity(snap, r, z, m.snapshot.velocity), {}};
    }
  });
  write_file(dir / "velocity.csv", [&](std::ostream& os) { write_velocity_csv(os, rows); });

  json rings = json::array();
  for (const auto& g : snap.rings) rings.push_back({{"x", g.x}, {"R", g.R}, {"H", g.H}});
  json outer = json::array();
  for (const auto& r : rows)
    outer.push_back({{"inside", r.outer.inside}, {"clipped", r.outer.clipped}, {"M", num(r.outer.value)}});
  write_json(dir / "bs_check.json",
             {{"rings", rings},
              {"omega_sup", snap.omega_sup()},
              {"stretching_rate", {{"moment", rate.moment}, {"rescaled", rate.rescaled}}},
              {"finite_difference", {{"h", h}, {"value", fd},
                                     {"relative_error", (fd - rate.moment) / rate.moment}}},
              {"outer_regions", outer}});
  std::cout << fmt::format("d_r u^r(0,0): moment {} rescaled {} finite difference {}\n",
                           fmt17(rate.moment), fmt17(rate.rescaled), fmt17(fd));
  return 0;
}

int cmd_lorentz(const Manifest& m, bool dump_field) {
  MultiringConfig cfg;
  cfg.eps = m.lorentz.eps;
  cfg.alpha = m.lorentz.alpha;
  cfg.m = m.lorentz.m;
  cfg.profile = make_profile(m.model.L, m.model.eta, m.model.r0);
  cfg.d = m.lorentz.d;
  cfg.grid = RingGrid{m.lorentz.grid};
  cfg.self_convergence_tol = m.lorentz.self_convergence_tol;
  const auto res = multiring_relative_vorticity_norm(cfg, m.lorentz.p, m.lorentz.q);
  const fs::path dir = prepare_dir(m);
  write_json(dir / "manifest.json", to_json(m));
  json out{{"norm", res.norm},
           {"single_ring", res.single_ring},
           {"profile_norm", res.profile_norm},
           {"lq_sum", res.lq_sum},
           {"ratio", res.ratio()},
           {"p", m.lorentz.p},
           {"q", m.lorentz.q}};
  if (m.lorentz.budget_target) {
    const auto b = smallness_budget(*m.lorentz.budget_target, m.lorentz.q, m.lorentz.alpha,
                                    cfg.profile, 1024, cfg.grid);
    out["budget"] = {{"target", *m.lorentz.budget_target}, {"eps", b.eps},
                     {"lorentz_bound", b.lorentz_bound}, {"sup_norm", b.sup_norm},
                     {"l1_bound", b.l1_bound}, {"total", b.total()}, {"truncation", b.truncation}};
  }
  write_json(dir / "lorentz.json", out);
  if (dump_field) {
    SampledField all;
    for (int k = 1; k <= cfg.m; ++k) {
      const double lx = std::log(cfg.eps) - cfg.alpha * std::log(double(k));
      const double ls = k * std::log(cfg.d);
      all.append(sample_ring_relative_vorticity_log(cfg.profile, lx, ls, ls, cfg.grid));
    }
    write_file(dir / "field.csv", [&](std::ostream& os) { write_field_csv(os, all); });
  }
  std::cout << fmt::format("L^(p,q) norm {}  l^q sum {}  ratio {}\n", fmt17(res.norm),
                           fmt17(res.lq_sum), fmt17(res.ratio()));
  return 0;
}

int cmd_verify_identity(const std::string& csv, double threshold) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("cannot open " + csv);
  const auto chk = verify_cascade_identity(in);
  const bool ok = chk.max_residual <= threshold;
  std::cout << json{{"max_residual", chk.max_residual},
                    {"threshold", threshold},
                    {"pairs", chk.pairs},
                    {"skipped", chk.skipped},
                    {"samples", chk.samples},
                    {"pass", ok}}
                   .dump()
            << '\n';
  return ok ? 0 : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale vortex-ring cascade laboratory"};
  app.require_subcommand(1);

  std::string manifest_path;
  Overrides over;
  bool dump_field = false;
  std::string csv_path;
  double threshold = 1e-7;

  auto* run = app.add_subcommand("run", "integrate one cascade run");
  run->add_option("manifest", manifest_path, "manifest file (kind: cascade)");
  over.add(run, {"model", "eps", "alpha", "m", "A", "mu", "t", "L", "eta", "rel-tol", "stride",
                 "stop-at-inflation", "points", "out"});

  auto* sweep = app.add_subcommand("sweep", "sweep, dichotomy or tn-scaling grid");
  sweep->add_option("manifest", manifest_path, "manifest file")->required();
  over.add(sweep, {"workers", "out"});

  auto* verify = app.add_subcommand("verify", "check an output file");
  verify->require_subcommand(1);
  auto* identity = verify->add_subcommand("cascade-identity", "cascade identity residual of a trajectory CSV");
  identity->add_option("csv", csv_path, "trajectory.csv")->required();
  identity->add_option("--threshold", threshold, "largest admissible residual")->capture_default_str();

  auto* coeffs = app.add_subcommand("coeffs", "frozen coefficient table");
  coeffs->add_option("manifest", manifest_path, "manifest file (kind: coeffs)");
  over.add(coeffs, {"L", "eta", "points", "out"});

  auto* bs = app.add_subcommand("bs-check", "Biot-Savart velocity and moment checks");
  bs->add_option("manifest", manifest_path, "manifest file (kind: bs-check)")->required();
  over.add(bs, {"workers", "out"});

  auto* lor = app.add_subcommand("lorentz", "Lorentz norm of multi-ring data");
  lor->add_option("manifest", manifest_path, "manifest file (kind: lorentz)");
  lor->add_flag("--dump-field", dump_field, "also write the sampled field");
  over.add(lor, {"eps", "alpha", "m", "q", "grid", "L", "eta", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return kExitUsage;
  }

  try {
    if (identity->parsed()) return cmd_verify_identity(csv_path, threshold);
    if (run->parsed()) {
      Manifest m = load_or_default(manifest_path, ExperimentKind::Cascade);
      require_kind(m, {ExperimentKind::Cascade});
      over.apply(m);
      return cmd_run(m);
    }
    if (sweep->parsed()) {
      Manifest m = load_manifest(manifest_path);
      over.apply(m);
      return cmd_sweep(m);
    }
    if (coeffs->parsed()) {
      Manifest m = load_or_default(manifest_path, ExperimentKind::Coeffs);
      require_kind(m, {ExperimentKind::Coeffs});
      over.apply(m);
      return cmd_coeffs(m);
    }
    if (bs->parsed()) {
      Manifest m = load_manifest(manifest_path);
      over.apply(m);
      return cmd_bs_check(m);
    }
    if (lor->parsed()) {
      Manifest m = load_or_default(manifest_path, ExperimentKind::Lorentz);
      require_kind(m, {ExperimentKind::Lorentz});
      over.apply(m);
      return cmd_lorentz(m, dump_field);
    }
  } catch (const ManifestError& e) {
    emit_error("manifest", e.what(),
               {{"field", e.field()},
                {"line", e.line() > 0 ? json(e.line()) : json(nullptr)},
                {"column", e.column() > 0 ? json(e.column()) : json(nullptr)}});
    return kExitUsage;
  } catch (const SeparationError& e) {
    emit_error("separation", e.what(), {{"ring", e.ring()}});
    return kExitFailure;
  } catch (const QuadratureError& e) {
    emit_error("quadrature", e.what(),
               {{"estimate", num(e.estimate())}, {"error_estimate", num(e.error_estimate())}});
    return kExitFailure;
  } catch (const IntegrationError& e) {
    emit_error("integration", e.what(), {{"t", num(e.last_state().t)}});
    return kExitFailure;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

#include "ringcascade/manifest.hpp"

#include "ringcascade/analysis.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ringcascade {

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Cascade: return "cascade";
    case ExperimentKind::Sweep: return "sweep";
    case ExperimentKind::Dichotomy: return "dichotomy";
    case ExperimentKind::TnScaling: return "tn-scaling";
    case ExperimentKind::BsCheck: return "bs-check";
    case ExperimentKind::Lorentz: return "lorentz";
    case ExperimentKind::Coeffs: return "coeffs";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::Cascade, ExperimentKind::Sweep, ExperimentKind::Dichotomy,
                 ExperimentKind::TnScaling, ExperimentKind::BsCheck, ExperimentKind::Lorentz,
                 ExperimentKind::Coeffs}) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown experiment kind '" + std::string(name) + "'");
}

namespace {

// Typed access to one mapping, with the dotted path kept for diagnostics.
class Section {
public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) fail(path_, node_, "expected a mapping");
  }

  explicit operator bool() const { return static_cast<bool>(node_); }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        fail(field(key), kv.first, "unknown key");
    }
  }

  template <class T>
  void get(std::string_view key, T& out) const {
    const auto n = child(key);
    if (!n) return;
    try {
      out = n.template as<T>();
    } catch (const YAML::Exception&) {
      fail(field(key), n, "wrong type");
    }
  }

  template <class T>
  void get(std::string_view key, std::optional<T>& out) const {
    const auto n = child(key);
    if (!n || n.IsNull()) return;
    T v{};
    get(key, v);
    out = v;
  }

  template <class T>
  void get_list(std::string_view key, std::vector<T>& out) const {
    const auto n = child(key);
    if (!n) return;
    if (!n.IsSequence()) fail(field(key), n, "expected a list");
    out.clear();
    for (const auto& e : n) {
      try {
        out.push_back(e.template as<T>());
      } catch (const YAML::Exception&) {
        fail(field(key), e, "wrong element type");
      }
    }
  }

  YAML::Node child(std::string_view key) const {
    if (!node_) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& n = node_;
    return n[std::string(key)];
  }
  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  [[noreturn]] static void fail(const std::string& field, const YAML::Node& at,
                                const std::string& what) {
    const auto mark = at.Mark();
    const int line = mark.line >= 0 ? mark.line + 1 : -1;
    const int col = mark.column >= 0 ? mark.column + 1 : -1;
    throw ManifestError(field + ": " + what, field, line, col);
  }

private:
  YAML::Node node_;
  std::string path_;
};

ModelKind model_kind(const Section& s, std::string_view key, const YAML::Node& n) {
  try {
    return parse_model_kind(n.as<std::string>());
  } catch (const std::exception& e) {
    Section::fail(s.field(key), n, e.what());
  }
}

}  // namespace

Manifest parse_manifest(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ManifestError(e.msg, "", e.mark.line + 1, e.mark.column + 1);
  }
  Manifest m;
  if (!root || root.IsNull()) throw ManifestError("empty manifest", "");
  const Section top(root, "");
  top.only({"kind", "output_dir", "workers", "model", "run", "integrator", "perturbation", "sweep",
            "snapshot", "lorentz"});

  if (const auto k = top.child("kind")) {
    try {
      m.kind = parse_experiment_kind(k.as<std::string>());
    } catch (const std::exception& e) {
      Section::fail("kind", k, e.what());
    }
  } else {
    throw ManifestError("kind: missing", "kind");
  }
  top.get("output_dir", m.output_dir);
  top.get("workers", m.workers);

  const Section model(top.child("model"), "model");
  model.only({"kind", "L", "eta", "r0", "weight", "table_points", "quad_rel_tol"});
  if (const auto k = model.child("kind")) m.model.kind = model_kind(model, "kind", k);
  model.get("L", m.model.L);
  model.get("eta", m.model.eta);
  model.get("r0", m.model.r0);
  model.get("weight", m.model.weight);
  model.get("table_points", m.model.table_points);
  model.get("quad_rel_tol", m.model.quad_rel_tol);

  const Section run(top.child("run"), "run");
  run.only({"eps", "alpha", "m", "A", "mu", "t_max", "sample_stride", "output_times",
            "stop_at_inflation"});
  run.get("eps", m.run.eps);
  run.get("alpha", m.run.alpha);
  run.get("m", m.run.m);
  run.get("A", m.run.A);
  run.get("mu", m.run.mu);
  run.get("t_max", m.run.t_max);
  run.get("sample_stride", m.run.sample_stride);
  run.get_list("output_times", m.run.output_times);
  run.get("stop_at_inflation", m.run.stop_at_inflation);

  const Section integ(top.child("integrator"), "integrator");
  integ.only({"rel_tol", "abs_tol", "max_step"});
  integ.get("rel_tol", m.integrator.rel_tol);
  integ.get("abs_tol", m.integrator.abs_tol);
  integ.get("max_step", m.integrator.max_step);

  const Section pert(top.child("perturbation"), "perturbation");
  pert.only({"breakpoints", "factors"});
  if (pert) {
    Perturbation p;
    pert.get_list("breakpoints", p.breakpoints);
    const auto f = pert.child("factors");
    if (!f || !f.IsSequence()) {
      throw ManifestError("perturbation.factors: expected a list", "perturbation.factors");
    }
    for (const auto& seg : f) {
      std::vector<double> v;
      try {
        if (seg.IsSequence()) {
          for (const auto& e : seg) v.push_back(e.as<double>());
        } else {
          v.push_back(seg.as<double>());
        }
      } catch (const YAML::Exception&) {
        Section::fail("perturbation.factors", seg, "wrong element type");
      }
      p.factors.push_back(std::move(v));
    }
    m.perturbation = std::move(p);
  }

  const Section sweep(top.child("sweep"), "sweep");
  sweep.only({"model", "L", "eps", "alpha", "A", "m", "fit", "theta", "q", "cone_margin"});
  if (const auto n = sweep.child("model")) {
    if (!n.IsSequence()) Section::fail("sweep.model", n, "expected a list");
    for (const auto& e : n) m.sweep.model.push_back(model_kind(sweep, "model", e));
  }
  sweep.get_list("L", m.sweep.L);
  sweep.get_list("eps", m.sweep.eps);
  if (const auto a = sweep.child("alpha"); a && a.IsScalar()) {
    if (a.as<std::string>() != "midpoint") Section::fail("sweep.alpha", a, "expected a list or 'midpoint'");
    m.sweep.alpha_midpoint = true;
  } else {
    sweep.get_list("alpha", m.sweep.alpha);
  }
  sweep.get_list("A", m.sweep.A);
  sweep.get_list("m", m.sweep.m);
  sweep.get("theta", m.sweep.theta);
  sweep.get("q", m.sweep.q);
  sweep.get("cone_margin", m.sweep.cone_margin);
  const Section fit(sweep.child("fit"), "sweep.fit");
  fit.only({"t", "k_min", "k_max"});
  fit.get("t", m.sweep.fit_t);
  fit.get("k_min", m.sweep.k_min);
  fit.get("k_max", m.sweep.k_max);

  const Section snap(top.child("snapshot"), "snapshot");
  snap.only({"rings", "t", "d", "points", "velocity"});
  if (const auto rings = snap.child("rings")) {
    if (!rings.IsSequence()) Section::fail("snapshot.rings", rings, "expected a list");
    for (const auto& r : rings) {
      const Section ring(r, "snapshot.rings[]");
      ring.only({"x", "R", "H"});
      Ring g{0, 0, 0};
      ring.get("x", g.x);
      ring.get("R", g.R);
      ring.get("H", g.H);
      m.snapshot.rings.push_back(g);
    }
  }
  snap.get("t", m.snapshot.t);
  snap.get("d", m.snapshot.d);
  if (const auto pts = snap.child("points")) {
    if (!pts.IsSequence()) Section::fail("snapshot.points", pts, "expected a list");
    for (const auto& p : pts) {
      if (!p.IsSequence() || p.size() != 2) Section::fail("snapshot.points", p, "expected [r, z]");
      try {
        m.snapshot.points.emplace_back(p[0].as<double>(), p[1].as<double>());
      } catch (const YAML::Exception&) {
        Section::fail("snapshot.points", p, "wrong element type");
      }
    }
  }
  const Section vel(snap.child("velocity"), "snapshot.velocity");
  vel.only({"tol", "theta_tol", "order", "max_depth"});
  vel.get("tol", m.snapshot.velocity.tol);
  vel.get("theta_tol", m.snapshot.velocity.theta_tol);
  vel.get("order", m.snapshot.velocity.order);
  vel.get("max_depth", m.snapshot.velocity.max_depth);

  const Section lor(top.child("lorentz"), "lorentz");
  lor.only({"eps", "alpha", "m", "p", "q", "grid", "d", "self_convergence_tol", "budget_target"});
  lor.get("eps", m.lorentz.eps);
  lor.get("alpha", m.lorentz.alpha);
  lor.get("m", m.lorentz.m);
  lor.get("p", m.lorentz.p);
  lor.get("q", m.lorentz.q);
  lor.get("grid", m.lorentz.grid);
  lor.get("d", m.lorentz.d);
  lor.get("self_convergence_tol", m.lorentz.self_convergence_tol);
  lor.get("budget_target", m.lorentz.budget_target);

  m.validate();
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string(), "");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

void Manifest::validate() const {
  auto require = [](bool ok, const char* field, const char* what) {
    if (!ok) throw ManifestError(std::string(field) + ": " + what, field);
  };
  require(workers >= 1, "workers", "must be >= 1");
  require(model.L > 0, "model.L", "must be positive");
  require(model.eta > 0 && model.eta < 1, "model.eta", "must lie in (0,1)");
  require(model.r0 > 0, "model.r0", "must be positive");
  require(model.weight > 0, "model.weight", "must be positive");
  require(model.table_points >= 2, "model.table_points", "must be >= 2");
  require(model.quad_rel_tol > 0, "model.quad_rel_tol", "must be positive");
  require(run.eps > 0, "run.eps", "must be positive");
  require(run.alpha >= 0 && run.alpha < 1, "run.alpha", "must lie in [0,1)");
  require(run.m >= 2, "run.m", "must be >= 2");
  require(run.A > 0, "run.A", "must be positive");
  require(run.mu > 0 && run.mu < 1, "run.mu", "must lie in (0,1)");
  require(run.t_max > 0, "run.t_max", "must be positive");
  require(run.sample_stride >= 1, "run.sample_stride", "must be >= 1");
  require(std::is_sorted(run.output_times.begin(), run.output_times.end()), "run.output_times",
          "must be sorted");
  require(integrator.rel_tol > 0, "integrator.rel_tol", "must be positive");
  require(integrator.abs_tol >= 0, "integrator.abs_tol", "must be >= 0");
  require(integrator.max_step > 0, "integrator.max_step", "must be positive");
  if (perturbation) {
    try {
      perturbation->validate(run.m);
    } catch (const std::invalid_argument& e) {
      throw ManifestError(e.what(), "perturbation");
    }
  }
  for (double v : sweep.alpha) require(v >= 0 && v < 1, "sweep.alpha", "entries must lie in [0,1)");
  for (double v : sweep.eps) require(v > 0, "sweep.eps", "entries must be positive");
  for (double v : sweep.A) require(v > 0, "sweep.A", "entries must be positive");
  for (double v : sweep.L) require(v > 0, "sweep.L", "entries must be positive");
  for (int v : sweep.m) require(v >= 2, "sweep.m", "entries must be >= 2");
  require(sweep.theta >= 1, "sweep.theta", "must be >= 1");
  require(sweep.q > 1, "sweep.q", "must be > 1");
  if (sweep.cone_margin) require(*sweep.cone_margin > 0, "sweep.cone_margin", "must be positive");
  for (const auto& g : snapshot.rings)
    require(g.x > 0 && g.R > 0 && g.H > 0, "snapshot.rings", "x, R, H must be positive");
  require(snapshot.d > 0 && snapshot.d < 1, "snapshot.d", "must lie in (0,1)");
  require(snapshot.velocity.tol > 0, "snapshot.velocity.tol", "must be positive");
  require(lorentz.eps > 0, "lorentz.eps", "must be positive");
  require(lorentz.alpha > 0, "lorentz.alpha", "must be positive");
  require(lorentz.m >= 1, "lorentz.m", "must be >= 1");
  require(lorentz.p > 1, "lorentz.p", "must be > 1");
  require(lorentz.q >= 1, "lorentz.q", "must be >= 1");
  require(lorentz.grid >= 2, "lorentz.grid", "must be >= 2");
  if (lorentz.budget_target) require(*lorentz.budget_target > 0, "lorentz.budget_target", "must be positive");

  const bool grid_kind = kind == ExperimentKind::Sweep || kind == ExperimentKind::Dichotomy ||
                         kind == ExperimentKind::TnScaling;
  if (grid_kind) {
    const bool any = !sweep.model.empty() || !sweep.L.empty() || !sweep.eps.empty() ||
                     !sweep.alpha.empty() || sweep.alpha_midpoint || !sweep.A.empty() ||
                     !sweep.m.empty();
    require(any, "sweep", "empty grid");
  }
  if (kind == ExperimentKind::TnScaling) require(!sweep.m.empty(), "sweep.m", "needs an m list");
}

namespace {

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  if (v) return num(*v);
  return nullptr;
}

}  // namespace

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json models = nlohmann::json::array();
  for (auto k : m.sweep.model) models.push_back(std::string(to_string(k)));
  nlohmann::json rings = nlohmann::json::array();
  for (const auto& g : m.snapshot.rings) rings.push_back({{"x", g.x}, {"R", g.R}, {"H", g.H}});
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : m.snapshot.points) points.push_back({p.first, p.second});
  nlohmann::json j{
      {"kind", std::string(to_string(m.kind))},
      {"output_dir", resolve_output_dir(m).string()},
      {"workers", m.workers},
      {"model",
       {{"kind", std::string(to_string(m.model.kind))},
        {"L", m.model.L},
        {"eta", m.model.eta},
        {"r0", m.model.r0},
        {"weight", m.model.weight},
        {"table_points", m.model.table_points},
        {"quad_rel_tol", m.model.quad_rel_tol}}},
      {"run",
       {{"eps", m.run.eps},
        {"alpha", m.run.alpha},
        {"m", m.run.m},
        {"A", m.run.A},
        {"mu", m.run.mu},
        {"t_max", num(m.run.t_max)},
        {"sample_stride", m.run.sample_stride},
        {"output_times", m.run.output_times},
        {"stop_at_inflation", m.run.stop_at_inflation}}},
      {"integrator",
       {{"rel_tol", m.integrator.rel_tol},
        {"abs_tol", m.integrator.abs_tol},
        {"max_step", num(m.integrator.max_step)}}},
      {"sweep",
       {{"model", models},
        {"L", m.sweep.L},
        {"eps", m.sweep.eps},
        {"alpha", m.sweep.alpha_midpoint ? nlohmann::json("midpoint") : nlohmann::json(m.sweep.alpha)},
        {"A", m.sweep.A},
        {"m", m.sweep.m},
        {"fit", {{"t", m.sweep.fit_t}, {"k_min", m.sweep.k_min}, {"k_max", m.sweep.k_max}}},
        {"theta", m.sweep.theta},
        {"q", m.sweep.q},
        {"cone_margin", opt(m.sweep.cone_margin)}}},
      {"snapshot",
       {{"rings", rings},
        {"t", m.snapshot.t},
        {"d", m.snapshot.d},
        {"points", points},
        {"velocity",
         {{"tol", m.snapshot.velocity.tol},
          {"theta_tol", m.snapshot.velocity.theta_tol},
          {"order", m.snapshot.velocity.order},
          {"max_depth", m.snapshot.velocity.max_depth}}}}},
      {"lorentz",
       {{"eps", m.lorentz.eps},
        {"alpha", m.lorentz.alpha},
        {"m", m.lorentz.m},
        {"p", m.lorentz.p},
        {"q", m.lorentz.q},
        {"grid", m.lorentz.grid},
        {"d", m.lorentz.d},
        {"self_convergence_tol", m.lorentz.self_convergence_tol},
        {"budget_target", opt(m.lorentz.budget_target)}}}};
  if (m.perturbation) {
    j["perturbation"] = {{"breakpoints", m.perturbation->breakpoints},
                         {"factors", m.perturbation->factors}};
  } else {
    j["perturbation"] = nullptr;
  }
  return j;
}

std::shared_ptr<const CoefficientTable> build_table(const ModelConfig& cfg) {
  QuadratureSettings q;
  q.rel_tol = cfg.quad_rel_tol;
  return std::make_shared<const CoefficientTable>(
      CoefficientTable::build(make_profile(cfg.L, cfg.eta, cfg.r0), cfg.table_points, q));
}

GridCell base_cell(const Manifest& m) {
  return {m.model.kind, m.model.L, m.run.eps, m.run.alpha, m.run.A, m.run.m};
}

std::vector<GridCell> expand_grid(const Manifest& m) {
  const GridCell base = base_cell(m);
  auto axis = [](const auto& values, auto fallback) {
    using T = decltype(fallback);
    return values.empty() ? std::vector<T>{fallback} : std::vector<T>(values.begin(), values.end());
  };
  const auto models = axis(m.sweep.model, base.model);
  std::vector<double> Ls = axis(m.sweep.L, base.L);
  if (m.sweep.cone_margin) Ls = {choose_cone_slope(m.sweep.q, m.sweep.theta, *m.sweep.cone_margin, m.model.eta)};
  const auto epss = axis(m.sweep.eps, base.eps);
  const auto alphas = axis(m.sweep.alpha, base.alpha);
  const auto As = axis(m.sweep.A, base.A);
  const auto ms = axis(m.sweep.m, base.m);
  std::vector<GridCell> out;
  for (auto kind : models)
    for (double L : Ls)
      for (double eps : epss)
        for (double alpha : alphas) {
          double a = alpha;
          if (m.sweep.alpha_midpoint)
            a = admissible_alpha_range(L, m.sweep.theta, m.sweep.q, m.model.eta).midpoint();
          for (double A : As)
            for (int mm : ms) out.push_back({kind, L, eps, a, A, mm});
        }
  return out;
}

CascadeRun make_run(const Manifest& m, const GridCell& cell,
                    std::shared_ptr<const CoefficientTable> table) {
  CascadeRun run;
  switch (cell.model) {
    case ModelKind::Strong: run.model = CascadeModel::strong(cell.L, m.model.eta); break;
    case ModelKind::Flattened: run.model = CascadeModel::flattened(cell.L, m.model.eta); break;
    case ModelKind::Frozen:
      if (!table || table->profile().L != cell.L)
        throw std::invalid_argument("make_run: frozen model needs the table for L = " +
                                    std::to_string(cell.L));
      run.model = CascadeModel::frozen(std::move(table));
      break;
    case ModelKind::Localized:
      run.model = CascadeModel::localized(cell.L, m.model.eta, m.model.r0, m.model.weight);
      break;
  }
  run.eps = cell.eps;
  run.alpha = cell.alpha;
  run.m = cell.m;
  run.target_A = cell.A;
  run.mu = m.run.mu;
  run.t_max = m.run.t_max;
  run.integrator = m.integrator;
  run.perturbation = m.perturbation;
  run.output_times = m.run.output_times;
  run.sample_stride = m.run.sample_stride;
  run.stop_at_inflation = m.run.stop_at_inflation;
  run.validate();
  return run;
}

std::filesystem::path resolve_output_dir(const Manifest& m) {
  if (!m.output_dir.empty()) return m.output_dir;
  if (const char* env = std::getenv("RINGCASCADE_OUT"); env && *env) return env;
  return "ringcascade-out";
}

}  // namespace ringcascade

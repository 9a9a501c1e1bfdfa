#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ringcascade/analysis.hpp"
#include "ringcascade/io.hpp"
#include "ringcascade/manifest.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace ringcascade;
using doctest::Approx;

namespace {

ManifestError parse_error(const std::string& text) {
  try {
    parse_manifest(text);
  } catch (const ManifestError& e) {
    return e;
  }
  FAIL("manifest parsed but an error was expected");
  return ManifestError("", "");
}

CascadeTrajectory small_run() {
  CascadeRun r;
  r.model = CascadeModel::localized(50);
  r.eps = 1;
  r.alpha = 0.4;
  r.m = 24;
  r.target_A = 10;
  r.t_max = 1e12;
  return run_until_inflation(r).trajectory;
}

}  // namespace

TEST_CASE("experiment kinds round trip") {
  for (auto k : {ExperimentKind::Cascade, ExperimentKind::Sweep, ExperimentKind::Dichotomy,
                 ExperimentKind::TnScaling, ExperimentKind::BsCheck, ExperimentKind::Lorentz,
                 ExperimentKind::Coeffs})
    CHECK(parse_experiment_kind(to_string(k)) == k);
  CHECK_THROWS(parse_experiment_kind("plot"));
}

TEST_CASE("minimal manifest takes every default") {
  const auto m = parse_manifest("kind: cascade\n");
  CHECK(m.kind == ExperimentKind::Cascade);
  CHECK(m.model.kind == ModelKind::Flattened);
  CHECK(m.model.L == 50);
  CHECK(m.model.table_points == 512);
  CHECK(m.run.eps == 1);
  CHECK(m.run.alpha == 0.2);
  CHECK(m.run.m == 64);
  CHECK(m.integrator.rel_tol == 1e-9);
  CHECK(m.integrator.abs_tol == 1e-12);
  CHECK_FALSE(m.perturbation.has_value());
  const auto j = to_json(m);
  CHECK(j["run"]["mu"] == 0.05);
  CHECK(j["integrator"]["max_step"] == "inf");
}

TEST_CASE("full manifest parses every section") {
  const auto m = parse_manifest(R"(kind: cascade
output_dir: out/x
workers: 3
model: {kind: frozen, L: 40, eta: 0.2, table_points: 64}
run:
  eps: 0.5
  alpha: 0.35
  m: 128
  A: 5
  mu: 0.1
  t_max: .inf
  output_times: [0.5, 1.0]
  stop_at_inflation: true
integrator: {rel_tol: 1.0e-10, abs_tol: 1.0e-13, max_step: 0.5}
perturbation:
  breakpoints: [1.0]
  factors: [[1.1], [0.9]]
snapshot:
  rings: [{x: 1, R: 1, H: 1}]
  points: [[0.5, 0.5]]
  velocity: {tol: 1.0e-9}
lorentz: {alpha: 0.7, q: 3, budget_target: 0.2}
)");
  CHECK(m.output_dir == "out/x");
  CHECK(m.workers == 3);
  CHECK(m.model.kind == ModelKind::Frozen);
  CHECK(m.model.eta == 0.2);
  CHECK(std::isinf(m.run.t_max));
  CHECK(m.run.output_times == std::vector<double>{0.5, 1.0});
  CHECK(m.run.stop_at_inflation);
  CHECK(m.integrator.max_step == 0.5);
  REQUIRE(m.perturbation.has_value());
  CHECK(m.perturbation->factors.size() == 2);
  REQUIRE(m.snapshot.rings.size() == 1);
  CHECK(m.snapshot.points.front() == std::pair{0.5, 0.5});
  CHECK(m.snapshot.velocity.tol == 1e-9);
  CHECK(m.lorentz.q == 3);
  CHECK(*m.lorentz.budget_target == 0.2);
  CHECK(resolve_output_dir(m) == "out/x");
}

TEST_CASE("manifest errors carry field and position") {
  SUBCASE("unknown key") {
    const auto e = parse_error("kind: cascade\nrun:\n  eps: 1\n  alhpa: 0.3\n");
    CHECK(e.field() == "run.alhpa");
    CHECK(e.line() == 4);
    CHECK(e.column() == 3);
  }
  SUBCASE("bad type") {
    const auto e = parse_error("kind: cascade\nrun:\n  m: many\n");
    CHECK(e.field() == "run.m");
    CHECK(e.line() == 3);
  }
  SUBCASE("unknown model") {
    const auto e = parse_error("kind: cascade\nmodel:\n  kind: weak\n");
    CHECK(e.field() == "model.kind");
    CHECK(e.line() == 3);
  }
  SUBCASE("missing kind") { CHECK(parse_error("run: {m: 4}\n").field() == "kind"); }
  SUBCASE("syntax error") { CHECK(parse_error("kind: [cascade\n").line() > 0); }
  SUBCASE("validation") {
    CHECK(parse_error("kind: cascade\nrun: {alpha: 1.5}\n").field() == "run.alpha");
    CHECK(parse_error("kind: cascade\nrun: {m: 1}\n").field() == "run.m");
  }
  SUBCASE("empty grid") {
    CHECK(parse_error("kind: sweep\n").field() == "sweep");
    CHECK(parse_error("kind: sweep\nsweep: {m: []}\n").field() == "sweep");
    CHECK(parse_error("kind: tn-scaling\nsweep: {alpha: [0.5]}\n").field() == "sweep.m");
  }
}

TEST_CASE("grid expansion order is model, L, eps, alpha, A, m") {
  const auto m = parse_manifest(R"(kind: sweep
sweep:
  model: [flattened, strong]
  alpha: [0.1, 0.2]
  m: [16, 32, 64]
)");
  const auto cells = expand_grid(m);
  REQUIRE(cells.size() == 12);
  CHECK(cells[0].model == ModelKind::Flattened);
  CHECK(cells[0].alpha == 0.1);
  CHECK(cells[0].m == 16);
  CHECK(cells[1].m == 32);
  CHECK(cells[3].alpha == 0.2);
  CHECK(cells[3].m == 16);
  CHECK(cells[6].model == ModelKind::Strong);
  for (const auto& c : cells) {
    CHECK(c.eps == m.run.eps);
    CHECK(c.L == m.model.L);
  }
  const auto run = make_run(m, cells[4], nullptr);
  CHECK(run.m == 32);
  CHECK(run.alpha == 0.2);
  CHECK(run.model.kind == ModelKind::Flattened);
}

TEST_CASE("cone margin and alpha midpoint resolve through the helpers") {
  const auto m = parse_manifest(R"(kind: tn-scaling
model: {kind: frozen}
sweep:
  cone_margin: 0.5
  alpha: midpoint
  m: [64, 128]
)");
  const auto cells = expand_grid(m);
  REQUIRE(cells.size() == 2);
  const double L = choose_cone_slope(2, 1, 0.5);
  CHECK(cells[0].L == L);
  CHECK(cells[0].alpha == admissible_alpha_range(L, 1, 2).midpoint());
}

TEST_CASE("output directory falls back to the environment") {
  auto m = parse_manifest("kind: cascade\n");
  ::setenv("RINGCASCADE_OUT", "/tmp/rc-env", 1);
  CHECK(resolve_output_dir(m) == "/tmp/rc-env");
  ::unsetenv("RINGCASCADE_OUT");
  CHECK(resolve_output_dir(m) == "ringcascade-out");
}

TEST_CASE("trajectory CSV round trip reproduces the cascade identity") {
  const auto tr = small_run();
  std::stringstream csv;
  write_trajectory_csv(csv, tr);
  const std::string text = csv.str();
  CHECK(text.rfind("# ringcascade-csv v1\nt,k,x,gamma,zeta,b,S_k,B\n", 0) == 0);
  const auto check = verify_cascade_identity(csv);
  CHECK(check.samples == static_cast<long>(tr.samples.size()));
  CHECK(check.pairs + check.skipped == check.samples * (tr.run.m - 1));
  CHECK(check.max_residual <= 1e-8);
  CHECK(check.max_residual == Approx(max_cascade_residual(tr)).epsilon(1e-3).scale(1e-14));

  std::stringstream again;
  write_trajectory_csv(again, small_run());
  CHECK(again.str() == text);
}

TEST_CASE("identity checker rejects malformed input with a line number") {
  std::istringstream no_header("1,2,3\n");
  CHECK_THROWS_WITH(verify_cascade_identity(no_header), doctest::Contains("line 1"));
  std::istringstream bad_number("# ringcascade-csv v1\nt,k,x,gamma,zeta,b,S_k,B\n0,1,1,x,1,1,1,0\n");
  CHECK_THROWS_WITH(verify_cascade_identity(bad_number), doctest::Contains("line 3"));
  std::istringstream short_row("t,k,x,gamma,zeta,b,S_k,B\n0,1,1\n");
  CHECK_THROWS_WITH(verify_cascade_identity(short_row), doctest::Contains("line 2"));
  std::istringstream empty("");
  CHECK_THROWS(verify_cascade_identity(empty));
}

TEST_CASE("events JSON") {
  const auto tr = small_run();
  const auto j = events_json(tr);
  CHECK(j["status"] == "inflated");
  CHECK(j["t_N"].get<double>() == *tr.events.t_N);
  CHECK(j["run"]["model"] == "localized");
  CHECK(j["run"]["integrator"]["rel_tol"] == 1e-9);
  CHECK(j["samples"] == tr.samples.size());
  CHECK(j.contains("max_cascade_residual"));
}

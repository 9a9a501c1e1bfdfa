#include "ringcascade/io.hpp"

#include "ringcascade/analysis.hpp"
#include "ringcascade/format.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringcascade {

namespace {

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json opt(const std::optional<double>& v) {
  if (v) return num(*v);
  return nullptr;
}

}  // namespace

void write_trajectory_csv(std::ostream& os, const CascadeTrajectory& traj) {
  os << kCsvHeader << '\n' << "t,k,x,gamma,zeta,b,S_k,B\n";
  const auto& run = traj.run;
  for (const auto& s : traj.samples) {
    const Diagnostics d = diagnostics(s, run);
    const std::string t = fmt17(s.t);
    for (int k = 0; k < run.m; ++k) {
      os << t << ',' << k + 1 << ',' << fmt17(std::exp(s.logx(k))) << ',' << fmt17(d.gamma(k))
         << ',' << fmt17(d.zeta(k)) << ',' << fmt17(d.b(k)) << ',' << fmt17(d.S(k)) << ','
         << fmt17(s.B(k)) << '\n';
    }
  }
}

nlohmann::json to_json(const CascadeRun& run) {
  nlohmann::json j{{"model", std::string(to_string(run.model.kind))},
                   {"L", run.model.L},
                   {"eta", run.model.eta},
                   {"r0", run.model.r0},
                   {"weight", run.model.weight},
                   {"eps", run.eps},
                   {"alpha", run.alpha},
                   {"m", run.m},
                   {"A", run.target_A},
                   {"mu", run.mu},
                   {"inflation_level", run.inflation_level()},
                   {"t_max", num(run.t_max)},
                   {"integrator",
                    {{"rel_tol", run.integrator.rel_tol},
                     {"abs_tol", run.integrator.abs_tol},
                     {"max_step", num(run.integrator.max_step)}}}};
  if (run.model.table) j["table_points"] = run.model.table->gamma_grid().size();
  if (run.perturbation) {
    j["perturbation"] = {{"breakpoints", run.perturbation->breakpoints},
                         {"factors", run.perturbation->factors}};
  }
  return j;
}

nlohmann::json events_json(const CascadeTrajectory& traj) {
  return {{"t_N", opt(traj.events.t_N)},
          {"t_front_hit", opt(traj.events.t_front_hit)},
          {"status", traj.status == RunStatus::Inflated ? "inflated" : "completed"},
          {"run", to_json(traj.run)},
          {"samples", traj.samples.size()},
          {"steps", traj.steps},
          {"rejected_steps", traj.rejected},
          {"rhs_evaluations", traj.rhs_evaluations},
          {"max_cascade_residual", num(max_cascade_residual(traj))}};
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

double parse_double(std::string_view s, long line) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("line " + std::to_string(line) + ": bad number '" + std::string(s) +
                             "'");
  }
  return v;
}

}  // namespace

IdentityCheck verify_cascade_identity(std::istream& csv) {
  IdentityCheck out;
  std::string line;
  long lineno = 0;
  bool header = false;
  std::string prev_t;
  long prev_k = 0;
  double prev_gamma = 0, prev_B = 0;
  while (std::getline(csv, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "t,k,x,gamma,zeta,b,S_k,B")
        throw std::runtime_error("line " + std::to_string(lineno) + ": unexpected header");
      header = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 8)
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 8 fields");
    const std::string t(f[0]);
    const long k = std::lround(parse_double(f[1], lineno));
    const double gamma = parse_double(f[3], lineno);
    const double B = parse_double(f[7], lineno);
    if (t == prev_t && k == prev_k + 1) {
      if (std::isnormal(gamma) && std::isnormal(prev_gamma)) {
        const double r = std::log(gamma) - std::log(prev_gamma) + 3 * prev_B;
        out.max_residual = std::max(out.max_residual, std::abs(r));
        ++out.pairs;
      } else {
        ++out.skipped;
      }
    } else if (t != prev_t) {
      ++out.samples;
    }
    prev_t = t;
    prev_k = k;
    prev_gamma = gamma;
    prev_B = B;
  }
  if (!header) throw std::runtime_error("trajectory csv: missing header");
  return out;
}

}  // namespace ringcascade

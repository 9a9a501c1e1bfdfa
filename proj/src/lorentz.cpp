#include "ringcascade/lorentz.hpp"

#include "ringcascade/format.hpp"
#include "ringcascade/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace ringcascade {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}
}  // namespace

void SampledField::add(double value, double volume) {
  if (!(volume > 0)) throw std::invalid_argument("SampledField: volume must be positive");
  if (!(value >= 0) || !std::isfinite(value))
    throw std::invalid_argument("SampledField: value must be finite and >= 0");
  cells.push_back({value > 0 ? std::log(value) : kNegInf, std::log(volume)});
}

void SampledField::append(const SampledField& other) {
  cells.insert(cells.end(), other.cells.begin(), other.cells.end());
}

double log_lorentz_quasinorm(const SampledField& f, double p, double q) {
  if (!(p > 1)) throw std::invalid_argument("lorentz_quasinorm: p must be > 1");
  if (!(q >= 1) || !std::isfinite(q)) throw std::invalid_argument("lorentz_quasinorm: q in [1, inf)");
  std::vector<SampledField::Cell> c;
  c.reserve(f.cells.size());
  for (const auto& cell : f.cells)
    if (cell.log_value != kNegInf) c.push_back(cell);
  if (c.empty()) return kNegInf;
  std::stable_sort(c.begin(), c.end(),
                   [](const auto& a, const auto& b) { return a.log_value > b.log_value; });
  // ||f||^q = sum_i f_i^q (p/q) (V_i^{q/p} - V_{i-1}^{q/p}), V_i cumulative volume.
  const double r = q / p, log_pq = std::log(p / q);
  std::vector<double> terms;
  terms.reserve(c.size());
  double logV = kNegInf;
  for (const auto& cell : c) {
    const double logV_new = log_add(logV, cell.log_volume);
    const double growth = logV == kNegInf ? 0.0 : std::log(-std::expm1(r * (logV - logV_new)));
    terms.push_back(q * cell.log_value + log_pq + r * logV_new + growth);
    logV = logV_new;
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0;
  for (double t : terms) acc += std::exp(t - top);
  return (top + std::log(acc)) / q;
}

double lorentz_quasinorm(const SampledField& f, double p, double q) {
  return std::exp(log_lorentz_quasinorm(f, p, q));
}

SampledField sample_ring_relative_vorticity_log(const ProfileSpec& p, double log_x, double log_R,
                                                double log_H, const RingGrid& grid) {
  if (grid.n < 2) throw std::invalid_argument("RingGrid: n must be >= 2");
  SampledField f;
  const int n = grid.n;
  f.cells.reserve(static_cast<std::size_t>(n) * n);
  f.meta = fmt::format("ring n={} logR={} logH={}", n, fmt17(log_R), fmt17(log_H));
  const double ds = 2.0 / n;
  const double eta = p.eta;
  // Volume 2 pi r dr dz, doubled because both signs of z carry the same |omega|.
  const double log_vol0 = std::log(4 * std::numbers::pi) + log_R + log_H +
                          std::log(p.r0 * eta * ds) + std::log(p.z0() * eta * ds);
  const double log_amp = log_x + std::log(p.amplitude);
  auto log_bump = [&](double s) { return 1 - 1 / std::pow(1 - s * s, p.bump_order); };
  for (int i = 0; i < n; ++i) {
    const double s = -1 + (i + 0.5) * ds;
    const double log_r = log_R + std::log(p.r0 * (1 + eta * s));
    const double lb_s = log_bump(s);
    for (int j = 0; j < n; ++j) {
      const double t = -1 + (j + 0.5) * ds;
      f.add_log(log_amp + lb_s + log_bump(t) - log_r, log_vol0 + log_r);
    }
  }
  return f;
}

SampledField sample_ring_relative_vorticity(const ProfileSpec& p, double x, double R, double H,
                                            const RingGrid& grid) {
  return sample_ring_relative_vorticity_log(p, std::log(x), std::log(R), std::log(H), grid);
}

double profile_relative_norm(const ProfileSpec& p, double lp, double lq, const RingGrid& grid) {
  return lorentz_quasinorm(sample_ring_relative_vorticity_log(p, 0, 0, 0, grid), lp, lq);
}

MultiringNorm multiring_relative_vorticity_norm(const MultiringConfig& cfg, double p, double q) {
  if (cfg.m < 1) throw std::invalid_argument("multiring: m must be >= 1");
  if (!(cfg.eps > 0) || !(cfg.alpha > 0)) throw std::invalid_argument("multiring: eps, alpha > 0");
  if (!(cfg.d > 0 && cfg.d < 1)) throw std::invalid_argument("multiring: d in (0,1)");
  MultiringNorm out;
  out.profile_norm = profile_relative_norm(cfg.profile, p, q, cfg.grid);
  RingGrid fine{2 * cfg.grid.n};
  const double check = profile_relative_norm(cfg.profile, p, q, fine);
  if (std::abs(check - out.profile_norm) > cfg.self_convergence_tol * std::abs(check)) {
    throw GridResolutionError(
        fmt::format("multiring: grid n={} not self-converged ({} vs {})", cfg.grid.n,
                    fmt17(out.profile_norm), fmt17(check)));
  }
  SampledField all;
  all.cells.reserve(static_cast<std::size_t>(cfg.m) * cfg.grid.n * cfg.grid.n);
  const double log_d = std::log(cfg.d);
  double lq_acc = kNegInf;
  for (int k = 1; k <= cfg.m; ++k) {
    const double log_x = std::log(cfg.eps) - cfg.alpha * std::log(double(k));
    const double log_scale = k * log_d;
    SampledField ring =
        sample_ring_relative_vorticity_log(cfg.profile, log_x, log_scale, log_scale, cfg.grid);
    out.single_ring.push_back(lorentz_quasinorm(ring, p, q));
    all.append(ring);
    lq_acc = log_add(lq_acc, q * log_x);
  }
  out.norm = lorentz_quasinorm(all, p, q);
  out.lq_sum = std::exp(lq_acc / q) * out.profile_norm;
  return out;
}

double profile_l1_norm(const ProfileSpec& p, const QuadratureSettings& qs) {
  AdaptiveTensorGauss<double> quad(qs.order);
  quad.rel_tol = qs.rel_tol;
  quad.max_depth = qs.max_depth;
  const double eta = p.eta;
  auto f = [&](double s, double t) {
    return bump(s, p.bump_order) * bump(t, p.bump_order) * p.r0 * (1 + eta * s);
  };
  const auto res = quad.integrate(f, -1.0, 1.0, -1.0, 1.0);
  if (!res.converged)
    throw QuadratureError("profile_l1_norm: quadrature did not reach tolerance", res.value,
                          res.error);
  // 2 pi r dr dz over both signs of z.
  return 4 * std::numbers::pi * p.amplitude * eta * eta * p.r0 * p.z0() * res.value;
}

Budget smallness_budget(double target, double q, double alpha, const ProfileSpec& profile,
                        int truncation, const RingGrid& grid) {
  if (!(target > 0)) throw std::invalid_argument("smallness_budget: target must be positive");
  if (!(q >= 1)) throw std::invalid_argument("smallness_budget: q must be >= 1");
  if (!(alpha * q > 1)) throw std::invalid_argument("smallness_budget: need alpha q > 1");
  const double s = std::min(3.0, q);
  if (!(alpha * s > 1))
    throw std::invalid_argument("smallness_budget: need alpha min(3, q) > 1 for the tail bound");
  if (truncation < 1) throw std::invalid_argument("smallness_budget: truncation must be >= 1");

  MultiringConfig cfg;
  cfg.eps = 1;
  cfg.alpha = alpha;
  cfg.m = truncation;
  cfg.profile = profile;
  cfg.grid = grid;
  const auto head = multiring_relative_vorticity_norm(cfg, 3, q);
  // sum_{k > M} k^{-alpha s} <= M^{1 - alpha s} / (alpha s - 1)
  const double M = truncation;
  const double tail_s =
      std::pow(head.profile_norm, s) * std::pow(M, 1 - alpha * s) / (alpha * s - 1);
  const double lorentz1 = std::pow(std::pow(head.norm, s) + tail_s, 1 / s);

  const double sup1 = profile.amplitude;
  const double d3 = 1e-6;  // d^3 with d = 1e-2
  double geo = 0, dk3 = 1;
  for (int k = 1; k <= truncation; ++k) {
    dk3 *= d3;
    geo += std::pow(double(k), -alpha) * dk3;
  }
  geo += dk3 * d3 / (1 - d3);
  const double l1_1 = profile_l1_norm(profile) * geo;

  const double total1 = lorentz1 + sup1 + l1_1;
  double eps = std::min(1.0, target / total1);
  if (eps < 1) eps *= 1 - 1e-12;
  return {eps, eps * lorentz1, eps * sup1, eps * l1_1, truncation};
}

void write_field_csv(std::ostream& os, const SampledField& f) {
  os << kCsvHeader << '\n' << "value,volume\n";
  for (const auto& c : f.cells)
    os << fmt17(std::exp(c.log_value)) << ',' << fmt17(std::exp(c.log_volume)) << '\n';
}

}  // namespace ringcascade

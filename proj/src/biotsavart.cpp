#include "ringcascade/biotsavart.hpp"

#include "ringcascade/format.hpp"
#include "ringcascade/quadrature.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

namespace ringcascade {

SupportBox RingSnapshot::support(std::size_t k) const {
  const auto b = profile.upper_support();
  const auto& g = rings.at(k);
  return {b.r_lo * g.R, b.r_hi * g.R, b.z_lo * g.H, b.z_hi * g.H};
}

double RingSnapshot::omega_sup() const {
  double m = 0;
  for (const auto& g : rings) m = std::max(m, g.x);
  return m * profile.amplitude;
}

double RingSnapshot::omega(double r, double z) const {
  double w = 0;
  for (const auto& g : rings) w += g.x * eval_profile(profile, r / g.R, z / g.H);
  return w;
}

void RingSnapshot::check_separation() const {
  const double e = profile.eta;
  for (std::size_t k = 0; k + 1 < rings.size(); ++k) {
    if (!((1 + e) * rings[k + 1].R < (1 - e) * rings[k].R)) {
      throw SeparationError(fmt::format("rings {} and {} are not radially separated", k + 1, k + 2),
                            static_cast<int>(k + 1));
    }
  }
}

RingSnapshot snapshot_from_state(const CascadeState& state, const CascadeRun& run,
                                 const ProfileSpec& profile, double d) {
  RingSnapshot snap;
  snap.profile = profile;
  const int m = state.size();
  snap.rings.reserve(m);
  for (int k = 1; k <= m; ++k) {
    const double x = std::exp(state.logx(k - 1));
    const double stretch = x / run.initial_amplitude(k);
    const double dk = std::pow(d, k);
    snap.rings.push_back({x, dk * stretch, dk / (stretch * stretch)});
  }
  snap.check_separation();
  return snap;
}

namespace {

// Integral over one ring's upper support (scaled coordinates s, t in [-1,1])
// of kernel(r_y, z_y) * (-omega_k(r_y, z_y)) dr_y dz_y.
template <class Kernel>
QuadratureResult<double> ring_integral(const RingSnapshot& snap, const Ring& g, Kernel&& kernel,
                                       double rel_tol, int order, int max_depth,
                                       double s_lo = -1, double abs_tol = 0) {
  const auto& p = snap.profile;
  AdaptiveTensorGauss<double> quad(order);
  quad.rel_tol = rel_tol;
  quad.max_depth = max_depth;
  const double rc = g.R * p.r0, zc = g.H * p.z0(), eta = p.eta;
  const int n = p.bump_order;
  auto f = [&](double s, double t) {
    const double w = bump(s, n) * bump(t, n);
    if (w == 0) return 0.0;
    return kernel(rc * (1 + eta * s), zc * (1 + eta * t)) * w;
  };
  const double jac = g.x * p.amplitude * eta * eta * rc * zc;
  quad.abs_tol = abs_tol / jac;
  auto res = quad.integrate(f, s_lo, 1.0, -1.0, 1.0);
  res.value *= jac;
  res.error *= jac;
  return res;
}

// Angular panels graded toward theta = 0 when the kernel peak is narrow.
std::vector<double> theta_panels(double rx, double ry, double dz) {
  std::vector<double> edges{0.0};
  const double near2 = (rx - ry) * (rx - ry) + dz * dz;
  const double width = std::sqrt(near2 / (rx * ry));
  for (double w = width; w < 0.5; w *= 4) edges.push_back(w);
  edges.push_back(std::numbers::pi);
  return edges;
}

struct AngularKernels {
  double rx, zx, theta_tol;
  mutable long evaluations = 0;
  mutable bool failed = false;

  // int_0^{2pi} of the u^r angular factor for a source at (ry, +zy) and its
  // odd image at (ry, -zy).
  double radial(double ry, double zy) const {
    if (rx == 0) return 0;
    const double dm = zx - zy, dp = zx + zy;
    const double a = rx * rx + ry * ry, b = 2 * rx * ry;
    // int_0^pi cos(th) g(a) dth = 0, so g(a - b cos th) - g(a) is integrated
    // instead, in a form free of cancellation as rx -> 0.
    auto shift = [&](double d2, double bc) {
      const double P = std::sqrt(a + d2), Q = std::sqrt(a - bc + d2);
      const double P3 = P * P * P, Q3 = Q * Q * Q;
      return (Q * Q + Q * P + P * P) / ((P + Q) * P3 * Q3);
    };
    auto f = [&](double th) {
      const double c = std::cos(th);
      return c * c * b * (dm * shift(dm * dm, b * c) - dp * shift(dp * dp, b * c));
    };
    const double peak = b * (std::abs(dm) * shift(dm * dm, b) + std::abs(dp) * shift(dp * dp, b));
    return 2 * angular(f, ry, std::min(std::abs(dm), std::abs(dp)), peak);
  }

  // int_0^{2pi} of the u^z angular factor (sign included) for the same pair.
  double vertical(double ry, double zy) const {
    if (zx == 0) return 0;
    auto diff = [&](double A) {
      const double p2 = A + (zx - zy) * (zx - zy), q2 = A + (zx + zy) * (zx + zy);
      const double p = std::sqrt(p2), q = std::sqrt(q2);
      return 4 * zx * zy * (q2 + q * p + p2) / ((q + p) * p2 * p * q2 * q);
    };
    if (rx == 0) return -2 * std::numbers::pi * (-ry) * diff(ry * ry);
    auto f = [&](double th) {
      const double c = std::cos(th);
      const double A = rx * rx + ry * ry - 2 * rx * ry * c;
      return -(rx * c - ry) * diff(A);
    };
    const double A0 = (rx - ry) * (rx - ry);
    const double peak = (rx + ry) * diff(A0);
    return 2 * angular(f, ry, std::min(std::abs(zx - zy), std::abs(zx + zy)), std::abs(peak));
  }

  // peak bounds |f| on [0, pi]; it sets the rounding floor of the result.
  template <class F>
  double angular(F& f, double ry, double dz, double peak) const {
    AdaptiveGaussKronrod<double> gk;
    gk.rel_tol = theta_tol;
    gk.abs_tol = 64 * std::numeric_limits<double>::epsilon() * std::numbers::pi * peak;
    const auto edges = theta_panels(rx, ry, dz);
    const auto res = gk.integrate_panels(f, edges.begin(), edges.end());
    evaluations += res.evaluations;
    if (!res.converged) failed = true;
    return res.value;
  }
};

}  // namespace

VelocitySample velocity(const RingSnapshot& snap, double r, double z, const VelocityOptions& opt) {
  if (!(r >= 0)) throw std::invalid_argument("velocity: r must be >= 0");
  VelocitySample out;
  out.r = r;
  out.z = z;
  const AngularKernels ak{r, z, opt.theta_tol};
  const double pref = 1 / (4 * std::numbers::pi);
  // -omega appears in ring_integral; the Biot-Savart law uses +omega.
  auto radial = [&](double ry, double zy) { return -ry * ak.radial(ry, zy); };
  auto vertical = [&](double ry, double zy) { return -ry * ak.vertical(ry, zy); };
  // A coarse pass sizes each ring's contribution, so that rings far from the
  // point are resolved against the total rather than against themselves.
  constexpr int kCoarseDepth = 3;
  double scale_r = 0, scale_z = 0;
  for (const auto& g : snap.rings) {
    scale_r += std::abs(ring_integral(snap, g, radial, opt.tol, opt.order, kCoarseDepth).value);
    scale_z += std::abs(ring_integral(snap, g, vertical, opt.tol, opt.order, kCoarseDepth).value);
  }
  ak.failed = false;
  for (const auto& g : snap.rings) {
    const auto ur = ring_integral(snap, g, radial, opt.tol, opt.order, opt.max_depth, -1,
                                  opt.tol * scale_r);
    const auto uz = ring_integral(snap, g, vertical, opt.tol, opt.order, opt.max_depth, -1,
                                  opt.tol * scale_z);
    if (!ur.converged || !uz.converged || ak.failed) {
      throw QuadratureError("velocity: quadrature did not reach tolerance",
                            pref * (ur.value + uz.value), pref * (ur.error + uz.error));
    }
    out.u_r += pref * ur.value;
    out.u_z += pref * uz.value;
    out.quad_error += pref * (ur.error + uz.error);
  }
  return out;
}

std::vector<VelocitySample> velocity_batch(const RingSnapshot& snap,
                                           const std::vector<std::pair<double, double>>& points,
                                           const VelocityOptions& opt, int workers) {
  std::vector<VelocitySample> out(points.size());
  std::vector<std::exception_ptr> errors(points.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      try {
        out[i] = velocity(snap, points[i].first, points[i].second, opt);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace {
double moment_kernel(double r, double z) {
  const double d = r * r + z * z;
  return r * r * z / (d * d * std::sqrt(d));
}

// (3/4) times twice the upper-half moment, for one ring and r_y >= r_cut.
double ring_moment(const RingSnapshot& snap, const Ring& g, const QuadratureSettings& q,
                   double s_lo = -1) {
  const auto res = ring_integral(snap, g, moment_kernel, q.rel_tol, q.order, q.max_depth, s_lo);
  if (!res.converged)
    throw QuadratureError("ring moment: quadrature did not reach tolerance", res.value,
                          res.error);
  return 0.75 * 2 * res.value;
}
}  // namespace

StretchingRate origin_stretching_rate(const RingSnapshot& snap, const QuadratureSettings& q) {
  StretchingRate out{0, 0};
  for (const auto& g : snap.rings) {
    out.moment += ring_moment(snap, g, q);
    const double gamma = g.H / g.R;
    out.rescaled += 0.75 * g.x * gamma * gamma * lambda_frozen(snap.profile, gamma, q);
  }
  return out;
}

OuterMoment outer_moment(const RingSnapshot& snap, double rho, const QuadratureSettings& q) {
  OuterMoment out{0, {}, {}};
  const double cut = 2 * rho;
  for (std::size_t k = 0; k < snap.rings.size(); ++k) {
    const auto box = snap.support(k);
    if (box.r_lo >= cut) {
      out.value += ring_moment(snap, snap.rings[k], q);
      out.inside.push_back(static_cast<int>(k + 1));
    } else if (box.r_hi > cut) {
      const auto& g = snap.rings[k];
      const double s_lo = (cut / (g.R * snap.profile.r0) - 1) / snap.profile.eta;
      out.value += ring_moment(snap, g, q, s_lo);
      out.clipped.push_back(static_cast<int>(k + 1));
    }
  }
  return out;
}

Residuals prop21_residuals(const RingSnapshot& snap, double r, double z,
                           const VelocityOptions& opt) {
  if (!(r > 0) || z == 0) throw std::invalid_argument("prop21_residuals: need r > 0, z != 0");
  Residuals out;
  out.velocity = velocity(snap, r, z, opt);
  QuadratureSettings q;
  q.rel_tol = opt.tol;
  out.outer = outer_moment(snap, r, q);
  out.E_r = out.velocity.u_r / r - out.outer.value;
  out.E_z = out.velocity.u_z / z + 2 * out.outer.value;
  return out;
}

double annular_moment(double rho, double rho_out, double rel_tol) {
  if (!(rho > 0) || !(rho_out >= rho)) throw std::invalid_argument("annular_moment: 0 < rho <= rho_out");
  if (rho_out == rho) return 0;
  AdaptiveTensorGauss<double> quad(12);
  quad.rel_tol = rel_tol;
  // r = e^s and z = r u with u = t / (1 - t); the z < 0 half doubles the result.
  auto f = [](double s, double t) {
    if (t >= 1) return 0.0;
    const double u = t / (1 - t);
    const double dudt = 1 / ((1 - t) * (1 - t));
    const double rr = std::exp(s), zz = rr * u;
    const double d = rr * rr + zz * zz;
    return 2 * std::numbers::pi * 2 * rr * (rr * zz) / (d * d * std::sqrt(d)) * rr * dudt * rr;
  };
  const auto res =
      quad.integrate(f, std::log(2 * rho), std::log(2 * rho_out), 0.0, 1.0);
  if (!res.converged)
    throw QuadratureError("annular_moment: quadrature did not reach tolerance", res.value,
                          res.error);
  return res.value;
}

LogAffineFit fit_log_affine(const std::vector<double>& s, const std::vector<double>& y) {
  if (s.size() != y.size() || s.size() < 3)
    throw std::invalid_argument("fit_log_affine: need >= 3 matching points");
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1;
    A(i, 1) = std::log(s[static_cast<std::size_t>(i)]);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  const double scale = b.cwiseAbs().maxCoeff();
  const double res = (b - A * c).cwiseAbs().maxCoeff();
  return {c(0), c(1), scale > 0 ? res / scale : res};
}

void write_velocity_csv(std::ostream& os, const std::vector<Residuals>& rows) {
  os << kCsvHeader << '\n' << "r_x,z_x,u_r,u_z,E_r,E_z\n";
  for (const auto& r : rows) {
    os << fmt17(r.velocity.r) << ',' << fmt17(r.velocity.z) << ',' << fmt17(r.velocity.u_r) << ','
       << fmt17(r.velocity.u_z) << ',' << fmt17(r.E_r) << ',' << fmt17(r.E_z) << '\n';
  }
}

}  // namespace ringcascade

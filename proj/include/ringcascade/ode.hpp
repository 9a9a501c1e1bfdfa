#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace ringcascade {

template <typename Scalar = double>
struct StepControl {
  Scalar rel_tol = 1e-9;
  Scalar abs_tol = 1e-12;
  Scalar max_step = std::numeric_limits<Scalar>::infinity();
  Scalar min_step_fraction = 1e-14;  // relative to |t| + 1
};

/// Raised when the step size collapses below the rounding floor.
class StepUnderflow : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Dormand-Prince 5(4) with FSAL and the 4th-order dense output of Hairer,
/// Norsett and Wanner. The right-hand side is any callable
/// f(t, y, dydt) writing into dydt.
template <typename Scalar = double>
class DormandPrince54 {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  template <class Rhs>
  DormandPrince54(Rhs rhs_fn, Scalar t0, const Vector& y0, StepControl<Scalar> ctl)
      : ctl_(ctl), t_(t0), y_(y0) {
    rhs_ = [fn = std::move(rhs_fn)](Scalar t, const Vector& y, Vector& dy) { fn(t, y, dy); };
    const auto n = y0.size();
    k1_.resize(n);
    k2_.resize(n);
    k3_.resize(n);
    k4_.resize(n);
    k5_.resize(n);
    k6_.resize(n);
    k7_.resize(n);
    ytmp_.resize(n);
    ynew_.resize(n);
    rhs_(t_, y_, k1_);
    ++evals_;
    h_ = initial_step();
  }

  Scalar t() const { return t_; }
  const Vector& y() const { return y_; }
  const Vector& dydt() const { return k1_; }
  Scalar t_prev() const { return t_old_; }
  long steps() const { return accepted_; }
  long rejected() const { return rejected_; }
  long evaluations() const { return evals_; }

  /// Take one accepted step, never going beyond t_limit. Returns false when the
  /// step size underflows (state is left at the last accepted point).
  bool step(Scalar t_limit) {
    const Scalar floor = ctl_.min_step_fraction * (std::abs(t_) + 1);
    for (;;) {
      Scalar h = std::min({h_, ctl_.max_step, t_limit - t_});
      bool clipped = h < h_;
      if (h <= floor) {
        if (t_limit - t_ <= floor && t_limit > t_) {
          h = t_limit - t_;
          clipped = true;
        } else {
          return false;
        }
      }
      attempt(h);
      const Scalar err = error_norm();
      if (err <= 1) {
        const bool lands = h == t_limit - t_;
        t_old_ = t_;
        dense_prepare(h);
        t_ = lands ? t_limit : t_ + h;
        y_.swap(ynew_);
        k1_.swap(k7_);  // FSAL
        ++accepted_;
        Scalar fac = err == 0 ? Scalar(5) : Scalar(0.9) * std::pow(err, Scalar(-0.2));
        fac = std::clamp(fac, Scalar(0.2), Scalar(5));
        if (!clipped || fac < 1) h_ = h * fac;
        return true;
      }
      ++rejected_;
      h_ = h * std::max(Scalar(0.2), Scalar(0.9) * std::pow(err, Scalar(-0.2)));
    }
  }

  /// Dense output on the last accepted step [t_prev, t].
  Vector interpolate(Scalar t) const {
    const Scalar h = t_ - t_old_;
    const Scalar s = h == 0 ? Scalar(1) : (t - t_old_) / h;
    const Scalar s1 = 1 - s;
    return r1_ + s * (r2_ + s1 * (r3_ + s * (r4_ + s1 * r5_)));
  }

  /// Restart after a discontinuity in the right-hand side at the current t.
  void restart() {
    rhs_(t_, y_, k1_);
    ++evals_;
  }

private:
  void attempt(Scalar h) {
    constexpr Scalar a21 = 1.0 / 5;
    constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr Scalar a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    ytmp_ = y_ + h * a21 * k1_;
    rhs_(t_ + h / 5, ytmp_, k2_);
    ytmp_ = y_ + h * (a31 * k1_ + a32 * k2_);
    rhs_(t_ + 3 * h / 10, ytmp_, k3_);
    ytmp_ = y_ + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
    rhs_(t_ + 4 * h / 5, ytmp_, k4_);
    ytmp_ = y_ + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
    rhs_(t_ + 8 * h / 9, ytmp_, k5_);
    ytmp_ = y_ + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
    rhs_(t_ + h, ytmp_, k6_);
    ynew_ = y_ + h * (a71 * k1_ + a73 * k3_ + a74 * k4_ + a75 * k5_ + a76 * k6_);
    rhs_(t_ + h, ynew_, k7_);
    evals_ += 6;
    h_try_ = h;
  }

  Scalar error_norm() {
    constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    const Scalar h = h_try_;
    Scalar acc = 0;
    const auto n = y_.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar err =
          h * (e1 * k1_(i) + e3 * k3_(i) + e4 * k4_(i) + e5 * k5_(i) + e6 * k6_(i) + e7 * k7_(i));
      const Scalar sc =
          ctl_.abs_tol + ctl_.rel_tol * std::max(std::abs(y_(i)), std::abs(ynew_(i)));
      acc += (err / sc) * (err / sc);
    }
    const Scalar e = std::sqrt(acc / Scalar(n));
    return std::isfinite(e) ? e : std::numeric_limits<Scalar>::max();
  }

  void dense_prepare(Scalar h) {
    constexpr Scalar d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
    const Vector dy = ynew_ - y_;
    r1_ = y_;
    r2_ = dy;
    r3_ = h * k1_ - dy;
    r4_ = dy - h * k7_ - r3_;
    r5_ = h * (d1 * k1_ + d3 * k3_ + d4 * k4_ + d5 * k5_ + d6 * k6_ + d7 * k7_);
  }

  Scalar initial_step() {
    const auto n = y_.size();
    auto scaled = [&](const Vector& v) {
      Scalar acc = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar sc = ctl_.abs_tol + ctl_.rel_tol * std::abs(y_(i));
        acc += (v(i) / sc) * (v(i) / sc);
      }
      return std::sqrt(acc / Scalar(n));
    };
    const Scalar d0 = scaled(y_), d1 = scaled(k1_);
    Scalar h0 = (d0 < 1e-5 || d1 < 1e-5) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    h0 = std::min(h0, ctl_.max_step);
    ytmp_ = y_ + h0 * k1_;
    rhs_(t_ + h0, ytmp_, k2_);
    ++evals_;
    const Scalar d2 = scaled(k2_ - k1_) / h0;
    const Scalar dm = std::max(d1, d2);
    const Scalar h1 = dm <= 1e-15 ? std::max(Scalar(1e-6), h0 * Scalar(1e-3))
                                  : std::pow(Scalar(0.01) / dm, Scalar(0.2));
    return std::min({100 * h0, h1, ctl_.max_step});
  }

  std::function<void(Scalar, const Vector&, Vector&)> rhs_;
  StepControl<Scalar> ctl_;
  Scalar t_, t_old_{0}, h_{0}, h_try_{0};
  Vector y_;
  Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_;
  Vector r1_, r2_, r3_, r4_, r5_;
  long accepted_{0}, rejected_{0}, evals_{0};
};

}  // namespace ringcascade

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <iterator>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringcascade {

/// Thrown when an adaptive rule exhausts its refinement budget.
/// Carries the best estimate and the error estimate reached so far.
class QuadratureError : public std::runtime_error {
public:
  QuadratureError(const std::string& what, double estimate, double error_estimate)
      : std::runtime_error(what), estimate_(estimate), error_estimate_(error_estimate) {}
  double estimate() const { return estimate_; }
  double error_estimate() const { return error_estimate_; }

private:
  double estimate_;
  double error_estimate_;
};

template <typename Scalar = double>
struct QuadratureResult {
  Scalar value{0};
  Scalar error{0};
  long evaluations{0};
  bool converged{false};
};

/// Gauss-Legendre rule on [-1, 1].
///
/// Nodes come from the eigenvalues of the symmetric Jacobi matrix
/// (Golub-Welsch) and are then polished with a few Newton steps on P_n so
/// that both nodes and weights are accurate to rounding.
template <typename Scalar = double>
class GaussLegendreRule {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit GaussLegendreRule(int n) : nodes_(n), weights_(n) {
    if (n < 1) throw std::invalid_argument("GaussLegendreRule: n must be >= 1");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> jacobi =
        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n);
    for (int i = 1; i < n; ++i) {
      const Scalar b = Scalar(i) / std::sqrt(Scalar(4) * i * i - 1);
      jacobi(i, i - 1) = b;
      jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<decltype(jacobi)> solver(jacobi);
    for (int i = 0; i < n; ++i) {
      Scalar x = solver.eigenvalues()(i);
      Scalar dp = 1;
      for (int it = 0; it < 3; ++it) {
        auto [p, d] = legendre(n, x);
        dp = d;
        if (d != Scalar(0)) x -= p / d;
      }
      dp = legendre(n, x).second;
      nodes_(i) = x;
      weights_(i) = Scalar(2) / ((Scalar(1) - x * x) * dp * dp);
    }
  }

  int size() const { return static_cast<int>(nodes_.size()); }
  const Vector& nodes() const { return nodes_; }
  const Vector& weights() const { return weights_; }

  /// Integral over [a, b].
  template <class F>
  Scalar apply(F&& f, Scalar a, Scalar b) const {
    const Scalar half = (b - a) / 2, mid = (a + b) / 2;
    Scalar sum = 0;
    for (int i = 0; i < size(); ++i) sum += weights_(i) * f(mid + half * nodes_(i));
    return sum * half;
  }

  /// Tensor-product integral over [a0, b0] x [a1, b1]; f(x, y).
  template <class F>
  Scalar apply2(F&& f, Scalar a0, Scalar b0, Scalar a1, Scalar b1) const {
    const Scalar hx = (b0 - a0) / 2, mx = (a0 + b0) / 2;
    const Scalar hy = (b1 - a1) / 2, my = (a1 + b1) / 2;
    Scalar sum = 0;
    for (int i = 0; i < size(); ++i) {
      const Scalar x = mx + hx * nodes_(i);
      Scalar row = 0;
      for (int j = 0; j < size(); ++j) row += weights_(j) * f(x, my + hy * nodes_(j));
      sum += weights_(i) * row;
    }
    return sum * hx * hy;
  }

private:
  static std::pair<Scalar, Scalar> legendre(int n, Scalar x) {
    Scalar p0 = 1, p1 = x;
    if (n == 0) return {Scalar(1), Scalar(0)};
    for (int k = 2; k <= n; ++k) {
      const Scalar p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const Scalar dp = n * (x * p1 - p0) / (x * x - 1);
    return {p1, dp};
  }

  Vector nodes_;
  Vector weights_;
};

namespace detail {
// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7, 15) on a finite interval.
/// The piece with the largest error estimate is bisected until the summed
/// error estimate is below max(abs_tol, rel_tol |value|), or below the
/// rounding floor of the integral of |f| when the integrand cancels.
template <typename Scalar = double>
class AdaptiveGaussKronrod {
public:
  Scalar rel_tol = 1e-10;
  Scalar abs_tol = 0;
  int max_intervals = 4000;

  template <class F>
  QuadratureResult<Scalar> integrate(F&& f, Scalar a, Scalar b) const {
    const std::array<Scalar, 2> edges{a, b};
    return integrate_panels(f, edges.begin(), edges.end());
  }

  /// Same, seeded with the panels between consecutive breakpoints [first, last).
  template <class F, class It>
  QuadratureResult<Scalar> integrate_panels(F&& f, It first, It last) const {
    struct Piece {
      Scalar a, b, value, error, absval;
      bool operator<(const Piece& o) const { return error < o.error; }
    };
    QuadratureResult<Scalar> out;
    std::priority_queue<Piece> heap;
    auto eval = [&](Scalar lo, Scalar hi) {
      const auto r = kronrod(f, lo, hi);
      out.evaluations += 15;
      return Piece{lo, hi, r[0], r[1], r[2]};
    };
    Scalar total = 0, err = 0, l1 = 0;
    int count = 0;
    for (It it = first; it != last && std::next(it) != last; ++it) {
      Piece p = eval(*it, *std::next(it));
      total += p.value;
      err += p.error;
      l1 += p.absval;
      heap.push(p);
      ++count;
    }
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    auto done = [&] {
      return err <= std::max({abs_tol, rel_tol * std::abs(total), 50 * eps * l1});
    };
    while (!done()) {
      if (count >= max_intervals) break;
      Piece worst = heap.top();
      heap.pop();
      const Scalar mid = (worst.a + worst.b) / 2;
      Piece left = eval(worst.a, mid), right = eval(mid, worst.b);
      total += left.value + right.value - worst.value;
      err += left.error + right.error - worst.error;
      l1 += left.absval + right.absval - worst.absval;
      heap.push(left);
      heap.push(right);
      ++count;
    }
    // Re-sum to drop the drift of the running totals.
    total = err = l1 = 0;
    while (!heap.empty()) {
      total += heap.top().value;
      err += heap.top().error;
      l1 += heap.top().absval;
      heap.pop();
    }
    out.value = total;
    out.error = err;
    out.converged = done();
    return out;
  }

  /// {Kronrod value, |Kronrod - Gauss|, Kronrod integral of |f|}.
  template <class F>
  static std::array<Scalar, 3> kronrod(F& f, Scalar a, Scalar b) {
    const Scalar half = (b - a) / 2, mid = (a + b) / 2;
    const Scalar fc = f(mid);
    Scalar resk = fc * Scalar(detail::kWgk[7]);
    Scalar resg = fc * Scalar(detail::kWg[3]);
    Scalar resabs = std::abs(resk);
    for (int j = 0; j < 7; ++j) {
      const Scalar dx = half * Scalar(detail::kXgk[j]);
      const Scalar f1 = f(mid - dx), f2 = f(mid + dx);
      resk += Scalar(detail::kWgk[j]) * (f1 + f2);
      resabs += Scalar(detail::kWgk[j]) * (std::abs(f1) + std::abs(f2));
      if (j % 2 == 1) resg += Scalar(detail::kWg[j / 2]) * (f1 + f2);
    }
    const Scalar ah = std::abs(half);
    return {resk * half, std::abs((resk - resg) * half), resabs * ah};
  }
};

/// Adaptive 2D Gauss-Legendre on a rectangle with dyadic (quadtree) cell
/// refinement. Each cell carries a coarse n x n estimate and the sum of its
/// four children; their difference is the cell's error estimate. The cell
/// with the largest estimate is split until the total error is below
/// max(abs_tol, rel_tol * |value|) or every remaining cell sits at max_depth.
template <typename Scalar = double>
class AdaptiveTensorGauss {
public:
  Scalar rel_tol = 1e-8;
  Scalar abs_tol = 0;
  int max_depth = 14;
  int max_cells = 200000;

  explicit AdaptiveTensorGauss(int order = 12) : rule_(order) {}

  template <class F>
  QuadratureResult<Scalar> integrate(F&& f, Scalar x0, Scalar x1, Scalar y0, Scalar y1) const {
    struct Cell {
      Scalar x0, x1, y0, y1;
      int depth;
      Scalar coarse;
      std::array<Scalar, 4> child;
      Scalar value() const { return child[0] + child[1] + child[2] + child[3]; }
      Scalar error() const { return std::abs(value() - coarse); }
    };
    QuadratureResult<Scalar> out;
    const long per_rule = static_cast<long>(rule_.size()) * rule_.size();
    auto make = [&](Scalar a0, Scalar a1, Scalar b0, Scalar b1, int depth, Scalar coarse) {
      Cell c{a0, a1, b0, b1, depth, coarse, {}};
      const Scalar mx = (a0 + a1) / 2, my = (b0 + b1) / 2;
      c.child[0] = rule_.apply2(f, a0, mx, b0, my);
      c.child[1] = rule_.apply2(f, mx, a1, b0, my);
      c.child[2] = rule_.apply2(f, a0, mx, my, b1);
      c.child[3] = rule_.apply2(f, mx, a1, my, b1);
      out.evaluations += 4 * per_rule;
      return c;
    };
    auto cmp = [](const Cell& a, const Cell& b) { return a.error() < b.error(); };
    std::vector<Cell> heap;
    std::vector<Cell> frozen;
    const Scalar root_coarse = rule_.apply2(f, x0, x1, y0, y1);
    out.evaluations += per_rule;
    heap.push_back(make(x0, x1, y0, y1, 0, root_coarse));
    Scalar total = heap.front().value(), err = heap.front().error();
    int cells = 1;
    while (err > std::max(abs_tol, rel_tol * std::abs(total)) && !heap.empty()) {
      std::pop_heap(heap.begin(), heap.end(), cmp);
      Cell worst = heap.back();
      heap.pop_back();
      if (worst.depth + 1 >= max_depth || cells >= max_cells) {
        frozen.push_back(worst);
        if (cells >= max_cells) break;
        continue;
      }
      const Scalar mx = (worst.x0 + worst.x1) / 2, my = (worst.y0 + worst.y1) / 2;
      const std::array<std::array<Scalar, 4>, 4> boxes = {{{worst.x0, mx, worst.y0, my},
                                                           {mx, worst.x1, worst.y0, my},
                                                           {worst.x0, mx, my, worst.y1},
                                                           {mx, worst.x1, my, worst.y1}}};
      total -= worst.value();
      err -= worst.error();
      for (int i = 0; i < 4; ++i) {
        Cell c = make(boxes[i][0], boxes[i][1], boxes[i][2], boxes[i][3], worst.depth + 1,
                      worst.child[i]);
        total += c.value();
        err += c.error();
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
      cells += 3;
    }
    total = 0;
    err = 0;
    for (const auto& c : heap) {
      total += c.value();
      err += c.error();
    }
    for (const auto& c : frozen) {
      total += c.value();
      err += c.error();
    }
    out.value = total;
    out.error = err;
    out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
    return out;
  }

  const GaussLegendreRule<Scalar>& rule() const { return rule_; }

private:
  GaussLegendreRule<Scalar> rule_;
};

}  // namespace ringcascade

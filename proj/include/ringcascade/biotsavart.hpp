#pragma once

#include "ringcascade/cascade.hpp"
#include "ringcascade/profile.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace ringcascade {

/// One rescaled copy of the profile: x * phi(r / R, z / H).
struct Ring {
  double x;
  double R;
  double H;
};

/// Multi-ring vorticity field sum_k x_k phi(r / R_k, z / H_k).
struct RingSnapshot {
  std::vector<Ring> rings;
  ProfileSpec profile;

  /// Support of ring k (0-based) in z > 0.
  SupportBox support(std::size_t k) const;
  /// max_k x_k * amplitude; exact for disjoint supports.
  double omega_sup() const;
  double omega(double r, double z) const;
  /// Throws SeparationError naming the first pair that fails
  /// (1+eta) R_{k+1} < (1-eta) R_k.
  void check_separation() const;
};

class SeparationError : public std::invalid_argument {
public:
  SeparationError(const std::string& what, int k) : std::invalid_argument(what), k_(k) {}
  /// 1-based index of the outer ring of the offending pair.
  int ring() const { return k_; }

private:
  int k_;
};

inline constexpr double kScaleRatio = 1e-2;

/// R_k = d^k x_k / x_k(0), H_k = d^k (x_k(0) / x_k)^2 with d = 1e-2.
RingSnapshot snapshot_from_state(const CascadeState& state, const CascadeRun& run,
                                 const ProfileSpec& profile, double d = kScaleRatio);

struct VelocitySample {
  double r = 0, z = 0;
  double u_r = 0, u_z = 0;
  double quad_error = 0;
};

struct VelocityOptions {
  double tol = 1e-8;       // relative, per ring and component
  double theta_tol = 1e-11;
  int order = 8;
  int max_depth = 12;
};

/// Axisymmetric Biot-Savart velocity at (r, z). Each ring is integrated on
/// its own support (upper half plus its odd mirror image) and the ring
/// contributions are summed. Throws QuadratureError on non-convergence.
VelocitySample velocity(const RingSnapshot& snap, double r, double z,
                        const VelocityOptions& opt = {});

/// Concurrent evaluation of a batch of points; output order matches input.
std::vector<VelocitySample> velocity_batch(const RingSnapshot& snap,
                                           const std::vector<std::pair<double, double>>& points,
                                           const VelocityOptions& opt = {}, int workers = 1);

struct StretchingRate {
  double moment;     // (3/4) times the r^2 z / |y|^5 moment of -omega by direct quadrature
  double rescaled;   // sum_k (3/4) x_k Gamma_k^2 lambda_frozen(Gamma_k)
};

/// d u^r / d r at the origin, computed twice: as the 3D moment over each
/// ring's physical support and through the rescaled coefficient.
StretchingRate origin_stretching_rate(const RingSnapshot& snap, const QuadratureSettings& q = {});

struct OuterMoment {
  double value;               // (3/8pi) int_{r_y >= 2 rho} r_y z_y / |y|^5 (-omega) dy
  std::vector<int> inside;    // rings wholly inside {r_y >= 2 rho}
  std::vector<int> clipped;   // rings cut by r_y = 2 rho (clipped quadrature)
};

OuterMoment outer_moment(const RingSnapshot& snap, double rho, const QuadratureSettings& q = {});

struct Residuals {
  double E_r, E_z;
  VelocitySample velocity;
  OuterMoment outer;
};

/// E_r = u^r / r - M(r), E_z = u^z / z + 2 M(r) with M = outer_moment(., r).
Residuals prop21_residuals(const RingSnapshot& snap, double r, double z,
                           const VelocityOptions& opt = {});

/// Quadrature of |r_y z_y| / |y|^5 over {2 rho <= r_y < 2 rho_out} x R x [0, 2pi).
/// The closed form is (4 pi / 3) log(rho_out / rho).
double annular_moment(double rho, double rho_out, double rel_tol = 1e-10);

/// Least-squares fit y = a + b log(s); residual is max |y - fit| / max |y|.
struct LogAffineFit {
  double intercept, slope, residual;
};
LogAffineFit fit_log_affine(const std::vector<double>& s, const std::vector<double>& y);

void write_velocity_csv(std::ostream& os, const std::vector<Residuals>& rows);

}  // namespace ringcascade

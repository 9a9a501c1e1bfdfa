#pragma once

#include "ringcascade/profile.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ringcascade {

/// Piecewise-constant nonnegative field, stored in logs so that cells at
/// scale d^k with k in the hundreds stay representable.
struct SampledField {
  struct Cell {
    double log_value;   // log |f| on the cell; -inf for zero
    double log_volume;  // log of the 3D cell measure
  };
  std::vector<Cell> cells;
  std::string meta;

  void add(double value, double volume);
  void add_log(double log_value, double log_volume) { cells.push_back({log_value, log_volume}); }
  void append(const SampledField& other);
};

/// (int_0^inf (t^{1/p} f*(t))^q dt/t)^{1/q}, evaluated exactly on the step
/// rearrangement. Returns 0 for an empty or zero field.
double lorentz_quasinorm(const SampledField& f, double p, double q);
/// Same, returned as a logarithm (-inf for zero).
double log_lorentz_quasinorm(const SampledField& f, double p, double q);

struct RingGrid {
  int n = 48;  // cells per direction on the ring's support box
};

/// |omega_k| / r for one ring x * phi(r / R, z / H), sampled by the midpoint
/// rule on an n x n grid over its support (both signs of z).
SampledField sample_ring_relative_vorticity(const ProfileSpec& p, double x, double R, double H,
                                            const RingGrid& grid = {});
/// Same with log x, log R, log H, for scales below the double range.
SampledField sample_ring_relative_vorticity_log(const ProfileSpec& p, double log_x, double log_R,
                                                double log_H, const RingGrid& grid = {});

struct MultiringConfig {
  double eps = 1;
  double alpha = 0.6;
  int m = 8;
  ProfileSpec profile;
  double d = 1e-2;
  RingGrid grid;
  double self_convergence_tol = 1e-2;
};

struct MultiringNorm {
  double norm;                      // L^{p,q} norm of sum_k omega_k / r
  std::vector<double> single_ring;  // ||omega_k / r|| for each ring on its own
  double profile_norm;              // ||phi / r|| at unit scale
  double lq_sum;                    // (sum_k x_k^q)^{1/q} ||phi / r||
  double ratio() const { return norm / lq_sum; }
};

class GridResolutionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Samples omega_0 / r for the initial data x_k = eps k^{-alpha},
/// R_k = H_k = d^k. Throws GridResolutionError if the unit-scale profile norm
/// changes by more than self_convergence_tol when the grid is doubled.
MultiringNorm multiring_relative_vorticity_norm(const MultiringConfig& cfg, double p = 3,
                                                double q = 2);

/// ||phi / r||_{L^{p,q}} at R = H = 1.
double profile_relative_norm(const ProfileSpec& p, double lp, double lq, const RingGrid& grid = {});

/// Integral of |phi| over R^3 (cylindrical volume element).
double profile_l1_norm(const ProfileSpec& p, const QuadratureSettings& q = {});

struct Budget {
  double eps;
  double lorentz_bound;  // upper bound on the L^{3,q} norm of omega_0 / r at eps
  double sup_norm;       // ||omega_0||_inf at eps
  double l1_bound;       // upper bound on ||omega_0||_1 at eps
  double total() const { return lorentz_bound + sup_norm + l1_bound; }
  int truncation;        // rings sampled explicitly
};

/// Largest eps <= 1 whose L^{3,q} + L^inf + L^1 bound is at most target.
/// The L^{3,q} bound combines the sampled 2^10-ring field with an analytic
/// tail: for disjoint supports ||sum f_k||^s <= sum ||f_k||^s, s = min(3, q).
/// Throws std::invalid_argument unless alpha min(3, q) > 1.
Budget smallness_budget(double target, double q, double alpha, const ProfileSpec& profile,
                        int truncation = 1024, const RingGrid& grid = {});

void write_field_csv(std::ostream& os, const SampledField& f);

}  // namespace ringcascade

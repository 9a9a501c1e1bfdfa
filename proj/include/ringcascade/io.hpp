#pragma once

#include "ringcascade/cascade.hpp"

#include <json.hpp>

#include <iosfwd>

namespace ringcascade {

/// Long-format trajectory: one row per (sample, ring) with columns
/// t, k, x, gamma, zeta, b, S_k, B.
void write_trajectory_csv(std::ostream& os, const CascadeTrajectory& traj);

/// t_N, t_front_hit, status, run parameters, integrator settings and
/// residual maxima.
nlohmann::json events_json(const CascadeTrajectory& traj);

nlohmann::json to_json(const CascadeRun& run);

struct IdentityCheck {
  double max_residual = 0;  // max |log G_{k+1} - log G_k + 3 B_k|
  long pairs = 0;           // neighbouring rows compared
  long skipped = 0;         // pairs with a gamma that is zero or subnormal
  long samples = 0;
};

/// Re-derives the cascade identity from a trajectory CSV. Throws
/// std::runtime_error with the line number on malformed input.
IdentityCheck verify_cascade_identity(std::istream& csv);

}  // namespace ringcascade

#pragma once

#include <span>
#include <vector>

#include "rwis/collision.hpp"
#include "rwis/model.hpp"
#include "rwis/rng.hpp"
#include "rwis/stattest.hpp"
#include "rwis/walk.hpp"

namespace rwis {

/// Full state of the two-particle process J_t.
struct DuetState {
  LatticeVector pos1{0, 0}, pos2{0, 0};
  int state1 = 0, state2 = 0;
  double lambda = 0.5;  // speed of particle 1
  double clock = 0.0;

  bool together() const { return pos1 == pos2; }
};

struct DuetOptions {
  long long max_events = 100'000'000;
  std::size_t collision_log_cap = 1'000'000;
  bool record_collision_times = false;
  std::uint64_t reservoir_seed = 0x5EED;  // reservoir keeps its own stream so
                                          // logging does not perturb the path
};

/// Observables frozen at one horizon.
struct DuetSnapshot {
  double t = 0.0;
  DuetState state;
  long long n_collisions = 0;
  bool any_collision = false;
  double tau = 0.0;            // time of the last collision <= t
  LatticeVector eta_c{0, 0};   // common site of that collision
  double lambda_out = 0.0;     // energy split exiting it (lambda0 when none)
};

struct DuetSummary {
  DuetSnapshot final_state;
  std::vector<double> collision_times;  // reservoir beyond the cap
  long long collisions_seen = 0;
  long long n_events = 0;
};

/// Thrown when a run exceeds max_events; carries the state checkpoint.
struct partial_run_error : std::runtime_error {
  DuetState checkpoint;
  long long events;
  partial_run_error(const std::string& msg, DuetState s, long long e)
      : std::runtime_error(msg), checkpoint(s), events(e) {}
};

/// Exact event-driven realization of the two-particle dynamics: while apart,
/// total rate lambda~ = lambda + sqrt(1 - lambda^2) and particle i jumps with
/// probability lambda_i / lambda~; while together, rate lambda~ and the event
/// is a joint collision jump. Snapshots are emitted at the (sorted) horizons;
/// the summary's final snapshot sits at the largest horizon.
DuetSummary simulate_duet(const RWwISModel& model, const CollisionKernel& kernel,
                          const DuetState& initial, std::span<const double> horizons, Rng& rng,
                          const DuetOptions& options, std::vector<DuetSnapshot>* snapshots);

DuetSummary simulate_duet(const RWwISModel& model, const CollisionKernel& kernel,
                          const DuetState& initial, double horizon, Rng& rng,
                          const DuetOptions& options = {});

/// Time from one collision event to the next, exploiting that between
/// collisions the spatial difference is an RWwIS at rate lambda~: the
/// post-collision state is drawn from the kernel, the embedded difference
/// walk runs until it returns to the origin, and the gap is the Gamma-sum of
/// the corresponding exponential waits plus the final collision wait.
/// Censored at t_max.
CensoredObs difference_first_return(const RWwISModel& model, const CollisionKernel& kernel,
                                    const EnergySplit& split, double t_max, Rng& rng);

/// Per-trial last-collision observables across a horizon ladder; one path per
/// trial with snapshots at every horizon (common-path coupling across the
/// ladder).
struct EnsembleRow {
  double tau_over_t = 0.0;
  double eta_c_over_sqrt_t = 0.0;
  double lambda_out = 0.0;
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;  // scaled by 1/sqrt(t)
  int eps1 = 0, eps2 = 0;
  long long n_collisions = 0;
  bool any_collision = false;
};

struct EnsembleTable {
  std::vector<double> horizons;
  std::vector<std::vector<EnsembleRow>> rows;  // rows[h][trial]
  std::vector<long long> zero_collision_trials;
};

EnsembleTable last_collision_ensemble(const RWwISModel& model, const CollisionKernel& kernel,
                                      const DuetState& initial, std::vector<double> horizons,
                                      long long trials, std::uint64_t seed, int workers,
                                      const DuetOptions& options = {});

}  // namespace rwis

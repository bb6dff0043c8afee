#include "rwis/duet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwis {

DuetSummary simulate_duet(const RWwISModel& model, const CollisionKernel& kernel,
                          const DuetState& initial, std::span<const double> horizons, Rng& rng,
                          const DuetOptions& options, std::vector<DuetSnapshot>* snapshots) {
  if (model.dim != 2) throw std::invalid_argument("simulate_duet: model must be 2-dimensional");
  if (horizons.empty()) throw std::invalid_argument("simulate_duet: need at least one horizon");
  for (std::size_t i = 0; i + 1 < horizons.size(); ++i) {
    if (!(horizons[i] < horizons[i + 1])) {
      throw std::invalid_argument("simulate_duet: horizons must be strictly increasing");
    }
  }
  if (!(horizons.front() > 0.0)) throw std::invalid_argument("simulate_duet: horizon must be positive");
  if (!(initial.lambda >= 0.0 && initial.lambda <= 1.0)) {
    throw std::invalid_argument("simulate_duet: lambda0 outside [0,1]");
  }

  const JumpSampler jumps(model);
  const CollisionSampler collide(kernel, model);

  DuetSummary out;
  Rng reservoir_rng(options.reservoir_seed, 0xCA11);

  DuetState s = initial;
  DuetSnapshot last;  // last-collision bookkeeping carried forward
  last.state = s;
  last.lambda_out = s.lambda;
  last.any_collision = false;

  std::size_t next_h = 0;
  const double t_end = horizons.back();
  long long events = 0;
  long long n_coll = 0;

  auto emit = [&](double at) {
    DuetSnapshot snap = last;
    snap.t = at;
    snap.state = s;
    snap.state.clock = at;
    snap.n_collisions = n_coll;
    if (snapshots) snapshots->push_back(snap);
    out.final_state = snap;
  };

  for (;;) {
    const double l1 = s.lambda;
    const double l2 = std::sqrt(std::max(0.0, 1.0 - l1 * l1));
    const double lt = l1 + l2;
    const double wait = rng.exponential(lt);
    const double t_next = s.clock + wait;

    while (next_h < horizons.size() && horizons[next_h] < t_next) {
      emit(horizons[next_h]);
      ++next_h;
    }
    if (next_h >= horizons.size()) break;

    s.clock = t_next;
    if (events >= options.max_events) {
      throw partial_run_error("simulate_duet: exceeded max_events = " +
                                  std::to_string(options.max_events) + " before horizon " +
                                  std::to_string(t_end),
                              s, events);
    }
    ++events;

    if (s.together()) {
      const CollisionOutcome c = collide.sample(s.lambda, rng);
      ++n_coll;
      last.any_collision = true;
      last.tau = t_next;
      last.eta_c = s.pos1;
      last.lambda_out = c.lambda_plus;
      if (options.record_collision_times) {
        if (out.collision_times.size() < options.collision_log_cap) {
          out.collision_times.push_back(t_next);
        } else {
          const std::uint64_t j = reservoir_rng.below(static_cast<std::uint64_t>(n_coll));
          if (j < options.collision_log_cap) out.collision_times[j] = t_next;
        }
      }
      s.pos1 += c.z1;
      s.pos2 += c.z2;
      s.state1 = c.direction1;
      s.state2 = c.direction2;
      s.lambda = c.lambda_plus;
    } else {
      const bool first = rng.uniform() * lt < l1;
      if (first) {
        const auto o = jumps.sample(s.state1, rng);
        s.pos1.x() += o.dx;
        s.pos1.y() += o.dy;
        s.state1 = o.state;
      } else {
        const auto o = jumps.sample(s.state2, rng);
        s.pos2.x() += o.dx;
        s.pos2.y() += o.dy;
        s.state2 = o.state;
      }
    }
  }

  out.collisions_seen = n_coll;
  out.n_events = events;
  return out;
}

DuetSummary simulate_duet(const RWwISModel& model, const CollisionKernel& kernel,
                          const DuetState& initial, double horizon, Rng& rng,
                          const DuetOptions& options) {
  const double h[1] = {horizon};
  return simulate_duet(model, kernel, initial, h, rng, options, nullptr);
}

CensoredObs difference_first_return(const RWwISModel& model, const CollisionKernel& kernel,
                                    const EnergySplit& split, double t_max, Rng& rng) {
  if (model.dim != 2) {
    throw std::invalid_argument("difference_first_return: model must be 2-dimensional");
  }
  const CollisionSampler collide(kernel, model);
  const JumpSampler jumps(model);

  // Post-collision state: energies, directions and the initial offset all
  // come from the collision kernel.
  const CollisionOutcome c = collide.sample(split.lambda, rng);
  const double l1 = c.lambda_plus;
  const double l2 = std::sqrt(std::max(0.0, 1.0 - l1 * l1));
  const double lt = l1 + l2;

  long long dx = c.z1.x() - c.z2.x();
  long long dy = c.z1.y() - c.z2.y();
  int u1 = c.direction1, u2 = c.direction2;

  const long long max_steps =
      static_cast<long long>(1.25 * lt * t_max + 10.0 * std::sqrt(lt * t_max)) + 50;
  long long n = 0;
  while ((dx != 0 || dy != 0) && n < max_steps) {
    if (rng.uniform() * lt < l1) {
      const auto o = jumps.sample(u1, rng);
      dx += o.dx;
      dy += o.dy;
      u1 = o.state;
    } else {
      const auto o = jumps.sample(u2, rng);
      dx -= o.dx;
      dy -= o.dy;
      u2 = o.state;
    }
    ++n;
  }
  if (dx != 0 || dy != 0) return {t_max, true};
  // n embedded steps to meet plus the collision event itself.
  const double gap = rng.gamma(static_cast<double>(n + 1)) / lt;
  if (gap > t_max) return {t_max, true};
  return {gap, false};
}

EnsembleTable last_collision_ensemble(const RWwISModel& model, const CollisionKernel& kernel,
                                      const DuetState& initial, std::vector<double> horizons,
                                      long long trials, std::uint64_t seed, int workers,
                                      const DuetOptions& options) {
  if (trials < 1) throw std::invalid_argument("last_collision_ensemble: trials must be >= 1");
  std::sort(horizons.begin(), horizons.end());
  EnsembleTable table;
  table.horizons = horizons;
  table.rows.assign(horizons.size(), std::vector<EnsembleRow>(trials));
  table.zero_collision_trials.assign(horizons.size(), 0);

  DuetOptions opts = options;
  opts.record_collision_times = false;

  parallel_trials(trials, workers, [&](long long trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    std::vector<DuetSnapshot> snaps;
    snaps.reserve(horizons.size());
    simulate_duet(model, kernel, initial, horizons, rng, opts, &snaps);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const DuetSnapshot& s = snaps[h];
      const double rt = std::sqrt(s.t);
      EnsembleRow& row = table.rows[h][trial];
      row.any_collision = s.any_collision;
      row.tau_over_t = s.any_collision ? s.tau / s.t : 0.0;
      row.eta_c_over_sqrt_t =
          s.any_collision ? std::hypot(s.eta_c.x(), s.eta_c.y()) / rt : 0.0;
      row.lambda_out = s.lambda_out;
      row.x1 = s.state.pos1.x() / rt;
      row.y1 = s.state.pos1.y() / rt;
      row.x2 = s.state.pos2.x() / rt;
      row.y2 = s.state.pos2.y() / rt;
      row.eps1 = s.state.state1;
      row.eps2 = s.state.state2;
      row.n_collisions = s.n_collisions;
    }
  });
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    for (const auto& row : table.rows[h]) {
      if (!row.any_collision) ++table.zero_collision_trials[h];
    }
  }
  return table;
}

}  // namespace rwis

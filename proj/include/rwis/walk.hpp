#pragma once

#include <cstdint>
#include <vector>

#include "rwis/model.hpp"
#include "rwis/rng.hpp"

namespace rwis {

/// Flattened per-state cumulative tables for drawing one embedded-walk jump
/// (step vector and outgoing internal state) from the P_x rows.
class JumpSampler {
 public:
  explicit JumpSampler(const RWwISModel& model);

  struct Outcome {
    int dx, dy;
    int state;
  };

  Outcome sample(int state, Rng& rng) const {
    const std::uint32_t lo = offset_[state];
    const double r = rng.uniform();
    std::uint32_t i = lo;
    while (cum_[i] < r) ++i;
    return {dx_[i], dy_[i], next_[i]};
  }

  int states() const { return static_cast<int>(offset_.size()) - 1; }

 private:
  std::vector<std::uint32_t> offset_;  // per state: [offset[u], offset[u+1])
  std::vector<double> cum_;
  std::vector<std::int8_t> dx_, dy_;
  std::vector<std::uint16_t> next_;
};

struct WalkState {
  long long x = 0, y = 0;
  int state = 0;
  double time = 0.0;
  long long events = 0;
};

/// Event-driven single walk: exponential waits at the given rate, jumps per
/// the P_x rows, run until the clock passes `horizon`.
WalkState single_walk(const RWwISModel& model, double rate, double horizon, int initial_state,
                      Rng& rng);

/// Terminal state only, via the Poissonized step count (statistically
/// identical to single_walk, one fewer draw per event).
WalkState single_walk_terminal(const JumpSampler& sampler, double rate, double horizon,
                               int initial_state, Rng& rng);

/// Runs fn(trial) for trial in [0, n) across `workers` threads. Work items
/// must be independent; callers keep per-trial outputs indexed by trial so
/// the merged result does not depend on scheduling.
void parallel_trials(long long n, int workers, const std::function<void(long long)>& fn);

}  // namespace rwis

#include "rwis/walk.hpp"

#include <atomic>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace rwis {

JumpSampler::JumpSampler(const RWwISModel& model) {
  const int m = model.states();
  offset_.assign(m + 1, 0);
  for (int u = 0; u < m; ++u) {
    offset_[u] = static_cast<std::uint32_t>(cum_.size());
    double acc = 0.0;
    for (const auto& j : model.jumps) {
      for (int v = 0; v < m; ++v) {
        const double w = j.weights(u, v);
        if (w > 0.0) {
          acc += w;
          cum_.push_back(acc);
          dx_.push_back(static_cast<std::int8_t>(j.step.x()));
          dy_.push_back(static_cast<std::int8_t>(j.step.y()));
          next_.push_back(static_cast<std::uint16_t>(v));
        }
      }
    }
    if (cum_.size() == offset_[u]) {
      throw std::invalid_argument("JumpSampler: internal state " + std::to_string(u) +
                                  " has no outgoing transitions");
    }
    // Guard against the row summing to 1 - epsilon in floating point.
    cum_.back() = std::numeric_limits<double>::infinity();
  }
  offset_[m] = static_cast<std::uint32_t>(cum_.size());
}

WalkState single_walk(const RWwISModel& model, double rate, double horizon, int initial_state,
                      Rng& rng) {
  const JumpSampler sampler(model);
  WalkState w;
  w.state = initial_state;
  for (;;) {
    const double wait = rng.exponential(rate);
    if (w.time + wait > horizon) {
      w.time = horizon;
      return w;
    }
    w.time += wait;
    const auto o = sampler.sample(w.state, rng);
    w.x += o.dx;
    w.y += o.dy;
    w.state = o.state;
    ++w.events;
  }
}

WalkState single_walk_terminal(const JumpSampler& sampler, double rate, double horizon,
                               int initial_state, Rng& rng) {
  WalkState w;
  w.state = initial_state;
  w.time = horizon;
  const long long n = rng.poisson(rate * horizon);
  w.events = n;
  for (long long i = 0; i < n; ++i) {
    const auto o = sampler.sample(w.state, rng);
    w.x += o.dx;
    w.y += o.dy;
    w.state = o.state;
  }
  return w;
}

void parallel_trials(long long n, int workers, const std::function<void(long long)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (long long i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<long long> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&]() {
    for (;;) {
      const long long i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n, std::memory_order_relaxed);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = static_cast<int>(std::min<long long>(workers, n));
  pool.reserve(count);
  for (int w = 0; w < count; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rwis

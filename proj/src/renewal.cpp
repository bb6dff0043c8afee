#include "rwis/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rwis/stattest.hpp"
#include "rwis/walk.hpp"

namespace rwis {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogDoubleMax = 709.0;
}  // namespace

double TailFamily::quantile_tail(double u) const {
  const double lq = log_quantile_tail(u);
  if (lq > kLogDoubleMax) return kInf;
  return std::exp(lq);
}

TailFamily slowlog_tail() {
  TailFamily f;
  f.name = "slowlog";
  f.tail_class = TailClass::SlowlyVarying;
  f.tail = [](double t) { return t <= 0.0 ? 1.0 : 1.0 / std::log(std::exp(1.0) + t); };
  // 1 - F(x) = u  <=>  x = exp(1/u) - e; in log space
  // log x = 1/u + log(1 - e exp(-1/u)).
  f.log_quantile_tail = [](double u) {
    const double inv = 1.0 / u;
    if (inv > 60.0) return inv;  // the log1p correction underflows
    const double x = std::exp(inv) - std::exp(1.0);
    return x <= 0.0 ? -kInf : std::log(x);
  };
  return f;
}

TailFamily exp_tail() {
  TailFamily f;
  f.name = "exp";
  f.tail_class = TailClass::Light;
  f.tail = [](double t) { return t <= 0.0 ? 1.0 : std::exp(-t); };
  f.log_quantile_tail = [](double u) { return std::log(-std::log(u)); };
  return f;
}

TailFamily pareto_tail(double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("pareto_tail: beta must be positive");
  TailFamily f;
  f.name = "pareto:" + std::to_string(beta);
  f.tail_class = TailClass::RegularlyVarying;
  f.reg_var_index = beta;
  f.tail = [beta](double t) { return t <= 0.0 ? 1.0 : std::pow(1.0 + t, -beta); };
  // x = u^{-1/beta} - 1.
  f.log_quantile_tail = [beta](double u) {
    const double lx = -std::log(u) / beta;
    if (lx > 60.0) return lx;
    const double x = std::exp(lx) - 1.0;
    return x <= 0.0 ? -kInf : std::log(x);
  };
  return f;
}

TailFamily tail_by_name(const std::string& name) {
  if (name == "slowlog") return slowlog_tail();
  if (name == "exp") return exp_tail();
  if (name.rfind("pareto:", 0) == 0) return pareto_tail(std::stod(name.substr(7)));
  throw std::invalid_argument("unknown tail family '" + name + "'");
}

ParamChain constant_chain(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("constant_chain: lambda must be positive");
  ParamChain c;
  c.a = c.b = lambda;
  c.step = [lambda](double, Rng&) { return lambda; };
  c.stationary_cdf = [lambda](double x) { return x >= lambda ? 1.0 : 0.0; };
  c.stationary_sample = [lambda](Rng&) { return lambda; };
  return c;
}

ParamChain energy_chain(const CollisionKernel& kernel, double a, double b) {
  if (!(a > 0.0 && a < b)) throw std::invalid_argument("energy_chain: need 0 < a < b");
  ParamChain c;
  c.a = a;
  c.b = b;
  // The kernel acts on [0,1]; the chain value is the affine image on [a,b].
  c.step = [kernel, a, b](double lam, Rng& rng) {
    const double unit = std::clamp((lam - a) / (b - a), 0.0, 1.0);
    return a + (b - a) * kernel.sample_energy(unit, rng);
  };
  if (const auto cdf = kernel.stationary_cdf()) {
    c.stationary_cdf = [f = *cdf, a, b](double x) {
      return f(std::clamp((x - a) / (b - a), 0.0, 1.0));
    };
  }
  if (kernel.has_closed_form()) {
    c.stationary_sample = [kernel, a, b](Rng& rng) {
      return a + (b - a) * sample_stationary_energy(kernel, rng);
    };
  }
  return c;
}

RenewalObservables sample_path(const STMRP& process, double t, Rng& rng) {
  if (!(t >= 0.0)) throw std::invalid_argument("sample_path: t must be >= 0");
  if (!(process.lambda0 >= process.chain.a && process.lambda0 <= process.chain.b)) {
    throw std::invalid_argument("sample_path: lambda0 outside [a,b]");
  }
  RenewalObservables obs;
  double sum = 0.0, comp = 0.0;  // Kahan-compensated partial sum
  double lam = process.lambda0;
  obs.current_type = lam;
  for (long long n = 0;; ++n) {
    if (n >= 1'000'000'000LL) {
      throw std::runtime_error("sample_path: more than 1e9 renewals before t");
    }
    const double x = process.tail.sample(rng) / lam;
    double next = sum;
    if (std::isfinite(x)) {
      const double y = x - comp;
      next = sum + y;
      comp = (next - sum) - y;
    } else {
      next = kInf;
    }
    if (next > t) {
      obs.age = t - sum;
      obs.residual = next - t;
      obs.current_type = lam;
      obs.last_epoch = sum;
      return obs;
    }
    sum = next;
    ++obs.count;
    lam = process.chain.step(lam, rng);
  }
}

std::vector<AgeResidualRow> age_residual_law(const STMRP& process, std::span<const double> t_grid,
                                             long long trials, std::uint64_t seed, int workers) {
  if (trials < 1) throw std::invalid_argument("age_residual_law: trials must be >= 1");
  std::vector<AgeResidualRow> rows;
  for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
    const double t = t_grid[gi];
    std::vector<double> ages(trials), residuals(trials);
    parallel_trials(trials, workers, [&](long long trial) {
      Rng rng(seed, (static_cast<std::uint64_t>(gi) << 40) | static_cast<std::uint64_t>(trial));
      const auto obs = sample_path(process, t, rng);
      ages[trial] = obs.age / t;
      residuals[trial] = obs.residual / t;
    });
    AgeResidualRow row;
    row.t = t;
    row.age_q10 = quantile(ages, 0.10);
    row.age_median = quantile(ages, 0.50);
    row.age_q90 = quantile(ages, 0.90);
    row.residual_q10 = quantile(residuals, 0.10);
    row.residual_median = quantile(residuals, 0.50);
    row.residual_q90 = quantile(residuals, 0.90);
    rows.push_back(row);
  }
  return rows;
}

std::vector<double> current_type_law(const STMRP& process, double t, long long trials,
                                     std::uint64_t seed, int workers) {
  if (trials < 1) throw std::invalid_argument("current_type_law: trials must be >= 1");
  std::vector<double> types(trials);
  parallel_trials(trials, workers, [&](long long trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    types[trial] = sample_path(process, t, rng).current_type;
  });
  return types;
}

OrderStatResult order_statistic_dominance(const TailFamily& tail, long long n, long long trials,
                                          std::uint64_t seed, int workers) {
  if (n < 1 || trials < 1) {
    throw std::invalid_argument("order_statistic_dominance: n and trials must be >= 1");
  }
  OrderStatResult out;
  out.gap_ratios.resize(trials);
  out.sum_over_max.resize(trials);
  parallel_trials(trials, workers, [&](long long trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    // Work in log space: log X = log_quantile_tail(u).
    std::vector<double> logs(n);
    for (long long i = 0; i < n; ++i) logs[i] = tail.log_quantile_tail(rng.uniform());
    double l1 = -kInf, l2 = -kInf;  // largest, second largest
    for (const double v : logs) {
      if (v > l1) {
        l2 = l1;
        l1 = v;
      } else if (v > l2) {
        l2 = v;
      }
    }
    if (n == 1) {
      out.gap_ratios[trial] = 1.0;
      out.sum_over_max[trial] = 1.0;
      return;
    }
    out.gap_ratios[trial] = std::exp(l2 - l1);
    double s = 0.0;
    for (const double v : logs) s += std::exp(v - l1);
    out.sum_over_max[trial] = s;
  });
  out.median_gap_ratio = median(out.gap_ratios);
  out.median_sum_over_max = median(out.sum_over_max);
  return out;
}

namespace {

double adaptive_simpson_rec(const std::function<double(double)>& f, double lo, double hi,
                            double flo, double fmid, double fhi, double whole, double tol,
                            int depth) {
  const double mid = 0.5 * (lo + hi);
  const double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
  const double flm = f(lmid), frm = f(rmid);
  const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
  const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
  const double delta = left + right - whole;
  if (depth <= 0) {
    throw std::runtime_error("adaptive_simpson: maximum refinement depth reached (residual " +
                             std::to_string(std::abs(delta)) + ")");
  }
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson_rec(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi, double tol,
                        int max_depth) {
  if (!(hi > lo)) return 0.0;
  const double mid = 0.5 * (lo + hi);
  const double flo = f(lo), fmid = f(mid), fhi = f(hi);
  const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
  return adaptive_simpson_rec(f, lo, hi, flo, fmid, fhi, whole, tol, max_depth);
}

TauberianResult tauberian_checks(const TailFamily& tail, std::span<const double> z_grid,
                                 std::span<const double> t_grid, long long trials,
                                 std::uint64_t seed, int workers) {
  TauberianResult out;
  for (const double z : z_grid) {
    if (!(z > 0.0 && z <= 1.0)) throw std::invalid_argument("tauberian_checks: z must lie in (0,1]");
    // 1 - phi(z) = z int_0^inf e^{-zx} (1-F(x)) dx, split at 1/z:
    // head: substitute x = y/z -> int_0^1 e^{-y} (1-F(y/z)) dy;
    // tail: substitute x = e^s/z -> int_0^inf e^{s - e^s} (1-F(e^s/z)) ds.
    const auto head = [&](double y) { return std::exp(-y) * tail.tail(y / z); };
    const auto tailpart = [&](double s) {
      const double es = std::exp(s);
      return std::exp(s - es) * tail.tail(es / z);
    };
    const double v = adaptive_simpson(head, 0.0, 1.0, 1e-12) +
                     adaptive_simpson(tailpart, 0.0, 40.0, 1e-12);
    TauberianPoint p;
    p.z = z;
    p.one_minus_phi = v;
    p.ratio_to_tail = v / tail.tail(1.0 / z);
    out.laplace.push_back(p);
  }

  STMRP iid{tail, constant_chain(1.0), 1.0};
  for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
    const double t = t_grid[gi];
    std::vector<double> counts(trials);
    parallel_trials(trials, workers, [&](long long trial) {
      Rng rng(seed, (static_cast<std::uint64_t>(gi + 1) << 42) | static_cast<std::uint64_t>(trial));
      counts[trial] = static_cast<double>(sample_path(iid, t, rng).count);
    });
    double mean = 0.0;
    for (const double c : counts) mean += c;
    mean /= static_cast<double>(trials);
    double var = 0.0;
    for (const double c : counts) var += (c - mean) * (c - mean);
    var /= std::max<double>(1.0, static_cast<double>(trials - 1));
    const double se = std::sqrt(var / static_cast<double>(trials));
    RenewalFunctionPoint p;
    p.t = t;
    p.u_estimate = mean;
    p.u_times_tail = mean * tail.tail(t);
    p.ci_lo = (mean - 2.5758 * se) * tail.tail(t);
    p.ci_hi = (mean + 2.5758 * se) * tail.tail(t);
    out.renewal.push_back(p);
  }
  return out;
}

SandwichResult renewal_sandwich(const TailFamily& tail, const ParamChain& chain, double t,
                                long long trials, std::uint64_t seed, int workers) {
  auto run = [&](const ParamChain& c, double lambda0, std::uint64_t salt, double& mean,
                 double& se) {
    STMRP p{tail, c, lambda0};
    std::vector<double> counts(trials);
    parallel_trials(trials, workers, [&](long long trial) {
      Rng rng(seed, (salt << 42) | static_cast<std::uint64_t>(trial));
      counts[trial] = static_cast<double>(sample_path(p, t, rng).count);
    });
    mean = 0.0;
    for (const double v : counts) mean += v;
    mean /= static_cast<double>(trials);
    double var = 0.0;
    for (const double v : counts) var += (v - mean) * (v - mean);
    var /= std::max<double>(1.0, static_cast<double>(trials - 1));
    se = std::sqrt(var / static_cast<double>(trials));
  };
  SandwichResult r;
  run(constant_chain(chain.a), chain.a, 1, r.mean_a, r.se_a);
  const double mid = 0.5 * (chain.a + chain.b);
  run(chain, mid, 2, r.mean_chain, r.se_chain);
  run(constant_chain(chain.b), chain.b, 3, r.mean_b, r.se_b);
  return r;
}

}  // namespace rwis

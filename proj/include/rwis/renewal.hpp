#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rwis/collision.hpp"
#include "rwis/rng.hpp"

namespace rwis {

enum class TailClass { SlowlyVarying, RegularlyVarying, Light };

/// A waiting-time distribution F on [0, inf) with the scaled family
/// F_lambda(t) = F(lambda t), i.e. X_lambda = X_1 / lambda. Quantiles are
/// exposed in log space so slowly varying tails (samples spanning beyond
/// 1e308) never overflow: a draw is made as u ~ U(0,1), X = Q(u) where u is
/// the upper-tail probability.
struct TailFamily {
  std::string name;
  TailClass tail_class = TailClass::Light;
  double reg_var_index = 0.0;  // for RegularlyVarying
  std::function<double(double)> tail;               // 1 - F(t)
  std::function<double(double)> log_quantile_tail;  // log Q(u), u = upper-tail prob

  double cdf(double t) const { return 1.0 - tail(t); }
  /// Q(u); +inf when the value exceeds double range.
  double quantile_tail(double u) const;
  /// Draws X_1; +inf when beyond double range.
  double sample(Rng& rng) const { return quantile_tail(rng.uniform()); }
  /// Whether the draw at upper-tail probability u exceeds the threshold
  /// (exact even when the value itself would overflow).
  bool exceeds(double u, double threshold) const { return u < tail(threshold); }
};

/// Built-in families. SlowLog: 1 - F(t) = 1/log(e + t) (slowly varying,
/// closed-form inverse t = exp(1/u) - e). Exp: rate 1. Pareto(beta):
/// 1 - F(t) = (1 + t)^(-beta).
TailFamily slowlog_tail();
TailFamily exp_tail();
TailFamily pareto_tail(double beta);
TailFamily tail_by_name(const std::string& name);  // "slowlog", "exp", "pareto:<beta>"

/// Markov chain of scale parameters on [a, b], 0 < a < b.
struct ParamChain {
  double a = 1.0, b = 1.0;
  std::function<double(double, Rng&)> step;
  std::function<double(double)> stationary_cdf;  // may be empty
  std::function<double(Rng&)> stationary_sample;  // may be empty
};

ParamChain constant_chain(double lambda);
/// Energy-kernel chain mapped affinely onto [a, b].
ParamChain energy_chain(const CollisionKernel& kernel, double a, double b);

/// Scaled-type Markovian renewal process: waits X_n = X / Lambda_n with the
/// parameter chain started at lambda0. Renewal epochs are T_0 = 0,
/// T_k = sum_{j<k} X_j; N_t counts renewals in [0, t] including the one at
/// t = 0.
struct STMRP {
  TailFamily tail;
  ParamChain chain;
  double lambda0 = 1.0;
};

struct RenewalObservables {
  long long count = 1;        // N_t (>= 1: the renewal at t=0)
  double age = 0.0;           // Y_t = t - T_{N_t - 1}
  double residual = 0.0;      // Z_t = T_{N_t} - t (may be +inf)
  double current_type = 0.0;  // Lambda_{N_t - 1}
  double last_epoch = 0.0;    // T_{N_t - 1}
};

/// Generates the parameter chain and waits until the partial sum passes t
/// (compensated summation). Throws after 1e9 terms.
RenewalObservables sample_path(const STMRP& process, double t, Rng& rng);

/// Quantiles of Y_t/t and Z_t/t across a horizon grid.
struct AgeResidualRow {
  double t = 0.0;
  double age_q10 = 0.0, age_median = 0.0, age_q90 = 0.0;
  double residual_q10 = 0.0, residual_median = 0.0, residual_q90 = 0.0;
};
std::vector<AgeResidualRow> age_residual_law(const STMRP& process, std::span<const double> t_grid,
                                             long long trials, std::uint64_t seed,
                                             int workers = 1);

/// Empirical law of the straddling-interval parameter Lambda_{N_t - 1}
/// (equal to lambda0 on paths with no completed renewal).
std::vector<double> current_type_law(const STMRP& process, double t, long long trials,
                                     std::uint64_t seed, int workers = 1);

/// Theorem of dominant maxima (k = 0): per-trial ratios of the top order
/// statistics of n iid draws.
struct OrderStatResult {
  double median_gap_ratio = 0.0;    // X_{n-1,n} / X_{n,n}
  double median_sum_over_max = 0.0; // sum_i X_{i,n} / X_{n,n}
  std::vector<double> gap_ratios;
  std::vector<double> sum_over_max;
};
OrderStatResult order_statistic_dominance(const TailFamily& tail, long long n, long long trials,
                                          std::uint64_t seed, int workers = 1);

/// Laplace/Tauberian numerics: (i) 1 - phi(z) = z int e^{-zx}(1-F(x))dx by
/// adaptive quadrature, reported relative to L(1/z) = 1 - F(1/z); (ii) the
/// renewal-function identity U(t)(1-F(t)) -> 1 with U(t) = E[N_t] from
/// simulation.
struct TauberianPoint {
  double z = 0.0;
  double one_minus_phi = 0.0;
  double ratio_to_tail = 0.0;  // (1 - phi(z)) / (1 - F(1/z))
};
struct RenewalFunctionPoint {
  double t = 0.0;
  double u_estimate = 0.0;  // E[N_t]
  double u_times_tail = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;
};
struct TauberianResult {
  std::vector<TauberianPoint> laplace;
  std::vector<RenewalFunctionPoint> renewal;
};
TauberianResult tauberian_checks(const TailFamily& tail, std::span<const double> z_grid,
                                 std::span<const double> t_grid, long long trials,
                                 std::uint64_t seed, int workers = 1);

/// Adaptive Simpson quadrature; throws std::runtime_error on non-convergence.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double tol, int max_depth = 48);

/// Mean renewal counts under constant-a, chain, constant-b parameters (the
/// sandwich bound used in the appendix proofs), with standard errors.
struct SandwichResult {
  double mean_a = 0.0, se_a = 0.0;
  double mean_chain = 0.0, se_chain = 0.0;
  double mean_b = 0.0, se_b = 0.0;
};
SandwichResult renewal_sandwich(const TailFamily& tail, const ParamChain& chain, double t,
                                long long trials, std::uint64_t seed, int workers = 1);

}  // namespace rwis

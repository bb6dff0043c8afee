#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "rwis/model.hpp"

namespace rwis {

/// alpha(s) = sum_x e^{i (s, x)} P_x, the operator-valued Fourier transform
/// of the jump family. Only the first dim(model) components of s are used.
ComplexMatrix fourier_symbol(const RWwISModel& model, const Eigen::Vector2d& s);

/// Thrown when eigenvector-overlap continuation cannot identify the
/// perturbed leading branch unambiguously.
struct branch_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The eigenvalue branch of alpha(s) that is continuous in s with chi(0) = 1,
/// tracked by maximal eigenvector overlap along the ray from 0 to s.
std::complex<double> leading_eigenvalue(const RWwISModel& model, const Eigen::Vector2d& s);

/// Expansion chi(s) = 1 - (s, sigma s)/2 + sum_{ijk} r3[ijk] s_i s_j s_k / 6 + o(|s|^3)
/// under no drift. Analytic coefficients come from second/third order
/// eigenvalue perturbation theory through the group inverse (Q-I)^#; they are
/// cross-checked against 4th-order central finite differences of the tracked
/// branch (step 1e-3) at construction.
struct EigenExpansion {
  int dim = 1;
  Matrix quadratic;                          // = sigma; chi ~ 1 - s'(quadratic)s/2
  std::vector<std::complex<double>> cubic;   // r3 tensor, flattened (i*d+j)*d+k
  Matrix quadratic_fd;                       // finite-difference counterparts
  std::vector<std::complex<double>> cubic_fd;
  double rel_dev_r2 = 0.0;
  double rel_dev_r3 = 0.0;

  double r2() const { return -quadratic(0, 0); }                // d = 1
  std::complex<double> r3() const { return cubic[0]; }          // d = 1
  const std::complex<double>& r3(int i, int j, int k) const {
    return cubic[(i * dim + j) * dim + k];
  }
};

/// Throws std::runtime_error when analytic and finite-difference coefficients
/// disagree beyond 1e-4 relative (implementation bug or violated
/// preconditions), std::domain_error when the model has drift.
EigenExpansion expansion_coeffs(const RWwISModel& model);

/// Thrown by exact_distribution when the requested window truncates more
/// than 1e-6 probability mass; carries a suggested replacement.
struct window_error : std::runtime_error {
  int suggested_window;
  explicit window_error(const std::string& msg, int suggestion)
      : std::runtime_error(msg), suggested_window(suggestion) {}
};

/// Exact law of the walk at time t on the window |x|_inf <= R, per internal
/// state, from Fourier inversion of exp(lambda t (alpha(s) - 1)) applied to
/// the initial point mass. Quadrature grids are doubled until two successive
/// grids agree to 1e-10 on the window.
class ExactLaw {
 public:
  ExactLaw(int dim, int states, int window, double time, double rate, int initial_state);

  double at(int x, int y, int state) const { return mass_[index(x, y, state)]; }
  double site_mass(int x, int y = 0) const;

  int dim() const { return dim_; }
  int states() const { return states_; }
  int window() const { return window_; }
  double time() const { return time_; }
  double rate() const { return rate_; }
  int initial_state() const { return initial_state_; }
  double tabulated_mass() const { return tabulated_mass_; }
  double truncation_bound() const { return truncation_bound_; }

  std::vector<double>& raw() { return mass_; }
  void finalize();  // clamps quadrature noise, computes mass totals

 private:
  std::size_t index(int x, int y, int state) const;
  int dim_, states_, window_, initial_state_;
  double time_, rate_;
  double tabulated_mass_ = 0.0, truncation_bound_ = 1.0;
  std::vector<double> mass_;
};

ExactLaw exact_distribution(const RWwISModel& model, double t, int window,
                            int initial_state = 0, double grid_tol = 1e-10);

/// Deviation of the exact law, summed over internal states, from the
/// Gaussian local-limit term (lambda t)^{-d/2} g_sigma(x / sqrt(lambda t)).
/// For d = 1 the comparison includes the r3 skew correction factor.
struct LltErrorRow {
  int x = 0, y = 0;
  double exact = 0.0;
  double gaussian = 0.0;
};

struct LltErrorResult {
  double t = 0.0;
  double lambda_t = 0.0;
  double error_sum = 0.0;  // sum_x |h_{t,x}(S) - gaussian(x)|
  double error_sup = 0.0;  // max_x |h_{t,x}(S) - gaussian(x)|
  std::vector<LltErrorRow> table;
};

LltErrorResult llt_error(const RWwISModel& model, double t, int initial_state = 0,
                         int window = -1, bool keep_table = false);

/// Least-squares fit of log(err) against log(lambda t).
struct RateFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double stderr_exponent = 0.0;
  double ci_lo = 0.0, ci_hi = 0.0;  // ~95% normal band
};
RateFit fit_rate(std::span<const double> lambda_ts, std::span<const double> errors);

/// Monte Carlo estimate of the first-return tail 1 - F_lambda(t) of a d = 2
/// model, via the embedded discrete walk (taboo at the origin) with
/// Poissonized clocks, censored at t_max.
struct TailPoint {
  double t = 0.0;
  long long survivors = 0;
  double tail = 0.0;
  double tail_times_log = 0.0;  // (1 - F_hat(t)) * log(lambda t)
  double ci_lo = 0.0, ci_hi = 0.0;
  bool low_survivors = false;  // fewer than 100 uncensored-survivor trials
};

struct ReturnTailResult {
  std::vector<TailPoint> points;
  double constant = 0.0;  // 2 pi sqrt(|sigma|)
  long long trials = 0;
  double t_max = 0.0;
};

ReturnTailResult first_return_tail(const RWwISModel& model, std::span<const double> t_grid,
                                   long long trials, std::uint64_t seed, int workers = 1,
                                   double t_max = -1.0, int initial_state = 0);

/// Raw first-return times (instrumentation for the scaling tests); +inf
/// marks censoring at t_max.
std::vector<double> sample_first_return_times(const RWwISModel& model, long long trials,
                                              std::uint64_t seed, int workers, double t_max,
                                              int initial_state = 0);

}  // namespace rwis

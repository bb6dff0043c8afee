#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

namespace rwis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using LatticeVector = Eigen::Vector2i;

/// Partition of the circle S = R/Z into m equal arcs; arc j stands for the
/// direction u_j = (j + 1/2)/m. The internal-state space of every model is
/// such a grid.
struct DirectionGrid {
  int arcs = 1;
  double arc_length() const { return 1.0 / arcs; }
  double midpoint(int j) const { return (j + 0.5) / arcs; }
  /// Length of the shorter arc between midpoints i and j.
  double arc_distance(int i, int j) const {
    double d = std::abs(midpoint(i) - midpoint(j));
    return std::min(d, 1.0 - d);
  }
};

/// One jump vector together with its m x m substochastic weight matrix.
/// Row = incoming internal state, column = outgoing internal state.
struct Jump {
  LatticeVector step;  // for dim()==1 the second component must be 0
  Matrix weights;
};

/// Continuous-time random walk on Z^d with internal states: exponential jump
/// clock of the given rate, jump law from the substochastic family {P_x}.
struct RWwISModel {
  int dim = 2;  // 1 or 2
  DirectionGrid grid;
  std::vector<Jump> jumps;
  double rate = 1.0;
  std::string name;

  int states() const { return grid.arcs; }
};

/// Moment structure of a model: stationary law, first/second/third jump
/// moments and the asymptotic covariance of the diffusive limit.
struct MomentSet {
  int dim = 0;
  Vector rho;                 // stationary probability row-vector
  std::vector<Matrix> M;      // M[l] = sum_x x_l P_x
  std::vector<Matrix> Sigma;  // Sigma[l*dim+m] = sum_x x_l x_m P_x
  std::vector<Matrix> Xi;     // Xi[(i*dim+j)*dim+k] = sum_x x_i x_j x_k P_x
  Matrix sigma;               // d x d asymptotic covariance

  const Matrix& M_(int l) const { return M[l]; }
  const Matrix& Sigma_(int l, int m) const { return Sigma[l * dim + m]; }
  const Matrix& Xi_(int i, int j, int k) const { return Xi[(i * dim + j) * dim + k]; }
};

struct ConditionCheck {
  std::string name;
  bool pass = false;
  double value = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ConditionCheck> checks;
  bool all_pass() const;
  std::string summary() const;
};

// Tolerances used by validate() and the loader.
inline constexpr double kStochasticTol = 1e-12;
inline constexpr double kStationaryTol = 1e-12;
inline constexpr double kDriftTol = 1e-10;
inline constexpr double kGapTol = 1e-6;  // gap present when |lambda_2| <= 1 - kGapTol

/// Q_S = sum_x P_x, the internal-state transition operator.
Matrix step_operator(const RWwISModel& model);

/// Stationary probability vector of a row-stochastic Q: rho Q = rho,
/// sum rho = 1. Throws std::runtime_error when the eigenproblem does not
/// resolve a unique stationary vector to kStationaryTol.
Vector stationary(const Matrix& q);
Vector stationary(const RWwISModel& model);

/// Modulus of the second-largest eigenvalue of Q.
double second_eigenvalue_modulus(const Matrix& q);

/// Applies the group inverse (Q - I)^# to v: solves (Q - I) y = v0 for the
/// mean-zero part v0 of v with side condition (rho, y) = 0, through the
/// rank-one corrected system (Q - I + 1 rho^T) y = v0.
Vector group_inverse_apply(const Matrix& q, const Vector& rho, const Vector& v);

/// Dense (Q - I)^# for repeated application.
Matrix group_inverse(const Matrix& q, const Vector& rho);

/// True iff the integer combinations of the jump vectors generate all of Z^d.
bool lattice_spans(const std::vector<Jump>& jumps, int dim);

MomentSet moments(const RWwISModel& model);

/// sigma_lm = (rho, Sigma_lm 1) - (rho, M_l (Q-I)^# M_m 1) - (rho, M_m (Q-I)^# M_l 1).
/// Requires no drift and a spectral gap; throws std::domain_error otherwise.
Matrix asymptotic_covariance(const RWwISModel& model);

/// Checks the standing conditions: row-stochasticity (hard failure -> throws
/// std::invalid_argument), spectral gap, no drift, bounded range, positive
/// definite sigma, lattice generation.
ValidationReport validate(const RWwISModel& model);

/// Built-in models: "simple2d", "simple1d", "persistent1d" (p=0.7),
/// "directional2d" (4 internal states, persistence 1/2), "skewed2d"
/// (m=1, nonzero third moments).
RWwISModel builtin_model(std::string_view name);
std::vector<std::string> builtin_model_names();

/// Model definition file: key-value lines (d, m, rate, name) plus one
/// [jump ...] table per jump vector with m rows of m entries. Rejects files
/// violating the invariants with line-prefixed messages.
RWwISModel load_model(const std::string& path);
RWwISModel parse_model(std::istream& in, const std::string& filename);
std::string format_model(const RWwISModel& model);

/// Resolves a --model argument: builtin name or path to a definition file.
RWwISModel resolve_model(const std::string& spec);

/// The spatial difference of two independent walkers with rates rate1 and
/// rate2 sharing the same jump family: an RWwIS on m^2 internal states
/// (pairs of the walkers' states) with total rate rate1 + rate2. Walker 1
/// moving by x shifts the difference by x, walker 2 by -x.
RWwISModel difference_model(const RWwISModel& model, double rate1, double rate2);

}  // namespace rwis

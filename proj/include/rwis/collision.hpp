#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rwis/model.hpp"
#include "rwis/rng.hpp"

namespace rwis {

/// Energy partition between the two particles under total energy 2E = 1:
/// lambda is the speed of particle 1, sqrt(1 - lambda^2) that of particle 2.
struct EnergySplit {
  double lambda = 0.5;

  double lambda2() const { return std::sqrt(1.0 - lambda * lambda); }
  double lambda_tilde() const { return lambda + lambda2(); }  // in [1, sqrt(2)]
};

/// Samplers clamp the outgoing speed into [kLambdaClamp, 1 - kLambdaClamp]
/// so downstream densities with 1/(lambda sqrt(1-lambda^2)) factors stay
/// finite.
inline constexpr double kLambdaClamp = 1e-9;

enum class EnergyKernelKind { Uniform, StickyBeta, Swap, Tabulated };
enum class DirectionLaw { Stationary, UniformArcs };

/// Tabulated energy kernel on a uniform bin grid over [0,1]^2; rows are
/// normalized on load.
struct TabulatedKernel {
  int bins = 0;
  std::vector<double> row_cdf;  // bins x bins cumulative rows
};

/// The mesoscopic collision kernel: outgoing energy law g(lambda_-, .),
/// outgoing direction pair, and displacement pair with |z^i|_inf <= 1.
/// Directions and displacements are independent of lambda_- given lambda_+.
class CollisionKernel {
 public:
  static CollisionKernel uniform_energy();
  static CollisionKernel sticky_beta(double kappa);
  static CollisionKernel deterministic_swap();
  static CollisionKernel tabulated(TabulatedKernel table);

  /// Loads a tabulated kernel from CSV columns (lambda_minus_bin,
  /// lambda_plus_bin, mass).
  static CollisionKernel tabulated_from_csv(const std::string& path, int bins);

  double sample_energy(double lambda_minus, Rng& rng) const;

  /// Closed-form stationary CDF when known (uniform-energy: x^2 on [0,1]).
  std::optional<std::function<double(double)>> stationary_cdf() const;
  std::optional<std::function<double(double)>> stationary_density() const;
  bool has_closed_form() const;

  EnergyKernelKind kind() const { return kind_; }
  double kappa() const { return kappa_; }
  std::string describe() const;

  DirectionLaw direction_law = DirectionLaw::Stationary;

 private:
  EnergyKernelKind kind_ = EnergyKernelKind::Uniform;
  double kappa_ = 0.0;
  TabulatedKernel table_;
};

/// Full collision outcome.
struct CollisionOutcome {
  double lambda_plus = 0.0;
  int direction1 = 0, direction2 = 0;
  LatticeVector z1{0, 0}, z2{0, 0};
};

/// Binds a kernel to a model's internal-state grid with the stationary
/// direction table precomputed; hot loops keep one of these.
class CollisionSampler {
 public:
  CollisionSampler(const CollisionKernel& kernel, const RWwISModel& model);

  /// Draws (lambda_+, u_+^1, u_+^2, z^1, z^2). Directions come from the
  /// model's stationary law (molecular chaos) or uniformly over arcs;
  /// displacements are independent uniform over {0, +-e1, +-e2}^2 minus the
  /// no-move pair.
  CollisionOutcome sample(double lambda_minus, Rng& rng) const;

 private:
  CollisionKernel kernel_;  // by value: samplers outlive temporaries
  int states_;
  std::vector<double> rho_cdf_;  // empty when directions are uniform over arcs
};

CollisionOutcome sample_collision(const CollisionKernel& kernel, const RWwISModel& model,
                                  double lambda_minus, Rng& rng);

/// The energy Markov chain induced by a collision kernel.
struct EnergyChain {
  CollisionKernel kernel;
};

enum class StationaryMethod { ClosedForm, LongRun };

struct StationaryEnergy {
  bool closed_form = false;
  std::function<double(double)> cdf;   // set when closed_form
  std::vector<double> sample;          // set for long-run estimates
  bool diagnostic_flagged = false;     // two-start KS exceeded 3 combined SE
  double two_start_ks = 0.0;
};

/// Closed form when registered; otherwise the empirical law of one n-step
/// path after n/10 burn-in, with a two-independent-starts diagnostic.
StationaryEnergy stationary_energy(const EnergyChain& chain, StationaryMethod method,
                                   long long n, std::uint64_t seed);

/// Draws a sample from the stationary energy law (closed-form kernels only).
double sample_stationary_energy(const CollisionKernel& kernel, Rng& rng);

/// The d >= 3 transient mixture rho~_{lambda0} = (1-F) sum_n F^n g^n(lambda0, .),
/// returned as an exact-weight sample: n is drawn geometrically (truncated at
/// n_max), the chain is run n steps. n_max must satisfy F^{n_max+1} <= 1e-9.
struct TransientMixture {
  std::vector<double> sample;
  double truncated_mass = 0.0;
  long long n_max = 0;
};
TransientMixture transient_mixture(const EnergyChain& chain, double return_probability,
                                   double lambda0, long long n_max, long long draws,
                                   std::uint64_t seed);

/// Minimal n_max with (1-F) sum_{n > n_max} F^n = F^{n_max+1} <= tol.
long long transient_mixture_order(double return_probability, double tol = 1e-9);

/// Kolmogorov-Smirnov distance between the n-step laws from two starts, per
/// n in n_grid, with a fitted exponential decay rate when decay is observed.
struct ErgodicityDiagnostic {
  std::vector<long long> n_grid;
  std::vector<double> distance;
  double decay_rate = 0.0;  // fitted rate r in dist ~ C e^{-r n}; 0 when not fitted
  bool decays = false;
};
ErgodicityDiagnostic ergodicity_diagnostic(const EnergyChain& chain, double lambda0_a,
                                           double lambda0_b, std::vector<long long> n_grid,
                                           long long paths, std::uint64_t seed);

}  // namespace rwis

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "rwis/model.hpp"
#include "rwis/rng.hpp"
#include "rwis/stattest.hpp"

namespace rwis {

/// Representation of the energy law rho_s used by the mixture: a sampler
/// plus either atoms (closed under empirical laws) or a density on [0,1]
/// for quadrature.
struct EnergyLawRep {
  std::string name;
  std::function<double(Rng&)> sample;
  std::vector<std::pair<double, double>> atoms;  // (lambda, weight); empty if density set
  std::function<double(double)> density;         // may be empty
  double mean_lambda = 0.0;                      // E[lambda]
  double mean_lambda2 = 0.0;                     // E[sqrt(1 - lambda^2)]
};

EnergyLawRep uniform_energy_rho_s();
EnergyLawRep point_energy(double lambda_star);
EnergyLawRep empirical_energy(std::vector<double> samples);

/// The mixture limit law: conditionally on lambda ~ rho_s the two particles
/// are independent Gaussians with covariances lambda sigma and
/// sqrt(1 - lambda^2) sigma; internal states are iid rho.
struct MixtureLaw {
  Matrix sigma;        // 2 x 2
  Matrix sigma_chol;   // lower Cholesky factor
  Vector rho;
  int arcs = 1;
  EnergyLawRep rho_s;
};

MixtureLaw make_mixture_law(const RWwISModel& model, EnergyLawRep rho_s);

struct MixtureSample {
  Eigen::Vector2d x1, x2;
  int u1 = 0, u2 = 0;
};

std::vector<MixtureSample> sample_mixture(const MixtureLaw& law, long long n, Rng& rng);

/// Theorem-1 density, with the internal-state factor read as arc mass over
/// arc length. Atomic rho_s laws are summed exactly; continuous ones are
/// integrated adaptively after the substitution lambda = sin(theta).
/// Throws std::runtime_error when the quadrature cannot converge (points
/// with |x| ~ 0 and rho_s mass at the endpoints).
double mixture_density(const MixtureLaw& law, const Eigen::Vector2d& x1, int u1,
                       const Eigen::Vector2d& x2, int u2);

/// Metric on (R^2 x S)^2: |x1-y1| + d_S(u1,w1) + |x2-y2| + d_S(u2,w2).
double product_metric(const MixtureSample& a, const MixtureSample& b, const DirectionGrid& grid);

struct FitReport {
  double energy_statistic = 0.0;
  double p_value = 1.0;
  int permutations = 0;
  std::size_t n_a = 0, n_b = 0;
  std::size_t pair_cap = 0;                      // subsample cap actually used
  double ks_x[4] = {0, 0, 0, 0};                 // x1.x, x1.y, x2.x, x2.y marginals
  double state_tv1 = 0.0, state_tv2 = 0.0;       // internal-state marginal TV
  CorrelationEstimate energy_corr_a, energy_corr_b;  // corr(|x1|^2, |x2|^2)
  bool corr_signs_agree = false;
};

/// Energy-distance two-sample permutation test under the product metric,
/// with marginal diagnostics. Samples larger than pair_cap are subsampled
/// (deterministically from rng) before the O(n^2) distance matrix.
FitReport two_sample_fit(std::span<const MixtureSample> a, std::span<const MixtureSample> b,
                         int permutations, Rng& rng, const DirectionGrid& grid,
                         std::size_t pair_cap = 2000);

struct CltReport {
  double ks_coord[2] = {0, 0};  // coordinates vs N(0, lambda sigma_ll)
  double ks_radial = 0.0;       // Mahalanobis radius^2 vs chi-square(d)
  double state_tv = 0.0;
  double state_chi2_p = 1.0;
  long long trials = 0;
};

/// Single-walk CLT check: scaled positions eta_t / sqrt(t) against
/// N(0, lambda sigma), internal states against rho.
CltReport clt_check(const RWwISModel& model, double lambda, double t, long long trials,
                    std::uint64_t seed, int workers = 1);

}  // namespace rwis

#include "rwis/mixture.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "rwis/renewal.hpp"  // adaptive_simpson
#include "rwis/walk.hpp"

namespace rwis {

namespace {
constexpr double kPi = std::numbers::pi;
}

EnergyLawRep uniform_energy_rho_s() {
  EnergyLawRep rep;
  rep.name = "uniform-energy";
  rep.sample = [](Rng& rng) { return std::sqrt(rng.uniform()); };
  rep.density = [](double l) { return (l >= 0.0 && l <= 1.0) ? 2.0 * l : 0.0; };
  rep.mean_lambda = 2.0 / 3.0;
  // E[sqrt(1-lambda^2)] with density 2 lambda: int 2 l sqrt(1-l^2) dl = 2/3.
  rep.mean_lambda2 = 2.0 / 3.0;
  return rep;
}

EnergyLawRep point_energy(double lambda_star) {
  if (!(lambda_star >= 0.0 && lambda_star <= 1.0)) {
    throw std::invalid_argument("point_energy: lambda outside [0,1]");
  }
  EnergyLawRep rep;
  rep.name = "point";
  rep.sample = [lambda_star](Rng&) { return lambda_star; };
  rep.atoms = {{lambda_star, 1.0}};
  rep.mean_lambda = lambda_star;
  rep.mean_lambda2 = std::sqrt(1.0 - lambda_star * lambda_star);
  return rep;
}

EnergyLawRep empirical_energy(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("empirical_energy: empty sample");
  EnergyLawRep rep;
  rep.name = "empirical";
  const double w = 1.0 / static_cast<double>(samples.size());
  rep.atoms.reserve(samples.size());
  double m1 = 0.0, m2 = 0.0;
  for (const double s : samples) {
    rep.atoms.emplace_back(s, w);
    m1 += s;
    m2 += std::sqrt(std::max(0.0, 1.0 - s * s));
  }
  rep.mean_lambda = m1 * w;
  rep.mean_lambda2 = m2 * w;
  auto shared = std::make_shared<std::vector<double>>(std::move(samples));
  rep.sample = [shared](Rng& rng) {
    return (*shared)[rng.below(shared->size())];
  };
  return rep;
}

MixtureLaw make_mixture_law(const RWwISModel& model, EnergyLawRep rho_s) {
  if (model.dim != 2) throw std::invalid_argument("make_mixture_law: model must be 2-dimensional");
  MixtureLaw law;
  law.sigma = asymptotic_covariance(model);
  law.sigma_chol = Eigen::LLT<Matrix>(law.sigma).matrixL();
  law.rho = stationary(model);
  law.arcs = model.states();
  law.rho_s = std::move(rho_s);
  return law;
}

std::vector<MixtureSample> sample_mixture(const MixtureLaw& law, long long n, Rng& rng) {
  std::vector<double> rho_cdf(law.arcs);
  double acc = 0.0;
  for (int i = 0; i < law.arcs; ++i) {
    acc += law.rho(i);
    rho_cdf[i] = acc;
  }
  rho_cdf[law.arcs - 1] = 1.0;
  auto draw_state = [&]() {
    const double r = rng.uniform();
    return static_cast<int>(std::lower_bound(rho_cdf.begin(), rho_cdf.end(), r) - rho_cdf.begin());
  };

  std::vector<MixtureSample> out(n);
  for (long long i = 0; i < n; ++i) {
    const double lam = law.rho_s.sample(rng);
    const double scale1 = std::sqrt(lam);
    const double scale2 = std::pow(std::max(0.0, 1.0 - lam * lam), 0.25);
    const Eigen::Vector2d z1(rng.normal(), rng.normal());
    const Eigen::Vector2d z2(rng.normal(), rng.normal());
    out[i].x1 = scale1 * (law.sigma_chol * z1);
    out[i].x2 = scale2 * (law.sigma_chol * z2);
    out[i].u1 = draw_state();
    out[i].u2 = draw_state();
  }
  return out;
}

double mixture_density(const MixtureLaw& law, const Eigen::Vector2d& x1, int u1,
                       const Eigen::Vector2d& x2, int u2) {
  const Matrix sigma_inv = law.sigma.inverse();
  const double det = law.sigma.determinant();
  const double q1 = x1.dot(sigma_inv * x1);
  const double q2 = x2.dot(sigma_inv * x2);
  const double arcs = static_cast<double>(law.arcs);
  const double state_density = law.rho(u1) * arcs * law.rho(u2) * arcs;
  const double prefactor = state_density / (4.0 * kPi * kPi * det);

  auto kernel = [&](double lam) {
    const double l2 = std::sqrt(std::max(0.0, 1.0 - lam * lam));
    if (lam <= 0.0 || l2 <= 0.0) return 0.0;
    return std::exp(-0.5 * (q1 / lam + q2 / l2)) / (lam * l2);
  };

  if (!law.rho_s.atoms.empty()) {
    double s = 0.0;
    for (const auto& [lam, w] : law.rho_s.atoms) s += w * kernel(lam);
    return prefactor * s;
  }
  if (!law.rho_s.density) {
    throw std::invalid_argument("mixture_density: rho_s has neither atoms nor density");
  }
  // lambda = sin(theta) regularizes the 1/sqrt(1-lambda^2) endpoint.
  auto integrand = [&](double theta) {
    const double lam = std::sin(theta);
    const double cosv = std::cos(theta);
    if (lam <= 0.0) return 0.0;
    return law.rho_s.density(lam) / lam * std::exp(-0.5 * (q1 / lam + q2 / cosv));
  };
  try {
    return prefactor * adaptive_simpson(integrand, 0.0, 0.5 * kPi, 1e-11);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("mixture_density: quadrature failed near the lambda "
                                         "endpoints (q1 = ") +
                             std::to_string(q1) + ", q2 = " + std::to_string(q2) + "): " + e.what());
  }
}

double product_metric(const MixtureSample& a, const MixtureSample& b, const DirectionGrid& grid) {
  return (a.x1 - b.x1).norm() + grid.arc_distance(a.u1, b.u1) + (a.x2 - b.x2).norm() +
         grid.arc_distance(a.u2, b.u2);
}

namespace {

std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t cap, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (n <= cap) return idx;
  for (std::size_t i = 0; i < cap; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  return idx;
}

// E(A,B) from the pairwise distances needs only the within-A pair sum once
// the row sums and the grand total are known:
//   sum_{i in A} R_i = 2 S_AA + S_AB,   T = S_AA + S_BB + S_AB.
double energy_stat_from_group_a(const std::vector<float>& dist, std::size_t n,
                                const std::vector<std::uint32_t>& group_a,
                                const std::vector<double>& row_sum, double total,
                                std::size_t nb) {
  double saa = 0.0, ra = 0.0;
  for (std::size_t u = 0; u < group_a.size(); ++u) {
    const std::size_t i = group_a[u];
    ra += row_sum[i];
    const float* row = dist.data() + i * n;
    double acc = 0.0;
    for (std::size_t v = u + 1; v < group_a.size(); ++v) acc += row[group_a[v]];
    saa += acc;
  }
  const double sab = ra - 2.0 * saa;
  const double sbb = total - saa - sab;
  const double fa = static_cast<double>(group_a.size()), fb = static_cast<double>(nb);
  return 2.0 * sab / (fa * fb) - 2.0 * saa / (fa * fa) - 2.0 * sbb / (fb * fb);
}

}  // namespace

FitReport two_sample_fit(std::span<const MixtureSample> a, std::span<const MixtureSample> b,
                         int permutations, Rng& rng, const DirectionGrid& grid,
                         std::size_t pair_cap) {
  if (a.size() < 8 || b.size() < 8) {
    throw std::invalid_argument("two_sample_fit: need at least 8 points per sample");
  }
  FitReport rep;
  rep.n_a = a.size();
  rep.n_b = b.size();
  rep.pair_cap = pair_cap;
  rep.permutations = permutations;

  // Marginal KS diagnostics on the full samples.
  auto coord = [](const MixtureSample& s, int k) {
    switch (k) {
      case 0: return s.x1.x();
      case 1: return s.x1.y();
      case 2: return s.x2.x();
      default: return s.x2.y();
    }
  };
  for (int k = 0; k < 4; ++k) {
    std::vector<double> va(a.size()), vb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) va[i] = coord(a[i], k);
    for (std::size_t i = 0; i < b.size(); ++i) vb[i] = coord(b[i], k);
    rep.ks_x[k] = ks_two_sample(va, vb);
  }
  {
    std::vector<double> ca1(grid.arcs, 0.0), cb1(grid.arcs, 0.0);
    std::vector<double> ca2(grid.arcs, 0.0), cb2(grid.arcs, 0.0);
    for (const auto& s : a) {
      ca1[s.u1] += 1.0 / a.size();
      ca2[s.u2] += 1.0 / a.size();
    }
    for (const auto& s : b) {
      cb1[s.u1] += 1.0 / b.size();
      cb2[s.u2] += 1.0 / b.size();
    }
    for (int i = 0; i < grid.arcs; ++i) {
      rep.state_tv1 += 0.5 * std::abs(ca1[i] - cb1[i]);
      rep.state_tv2 += 0.5 * std::abs(ca2[i] - cb2[i]);
    }
  }
  {
    auto sqnorms = [](std::span<const MixtureSample> s, std::vector<double>& e1,
                      std::vector<double>& e2) {
      e1.resize(s.size());
      e2.resize(s.size());
      for (std::size_t i = 0; i < s.size(); ++i) {
        e1[i] = s[i].x1.squaredNorm();
        e2[i] = s[i].x2.squaredNorm();
      }
    };
    std::vector<double> e1, e2;
    sqnorms(a, e1, e2);
    rep.energy_corr_a = correlation(e1, e2);
    sqnorms(b, e1, e2);
    rep.energy_corr_b = correlation(e1, e2);
    rep.corr_signs_agree = (rep.energy_corr_a.value < 0.0) == (rep.energy_corr_b.value < 0.0);
  }

  // Energy-distance permutation test on (sub)samples.
  const auto ia = subsample_indices(a.size(), pair_cap, rng);
  const auto ib = subsample_indices(b.size(), pair_cap, rng);
  const std::size_t na = ia.size(), nb = ib.size(), n = na + nb;
  std::vector<MixtureSample> pool;
  pool.reserve(n);
  for (const auto i : ia) pool.push_back(a[i]);
  for (const auto i : ib) pool.push_back(b[i]);

  std::vector<float> dist(n * n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const float d = static_cast<float>(product_metric(pool[i], pool[j], grid));
      dist[i * n + j] = d;
      dist[j * n + i] = d;
    }
  }
  std::vector<double> row_sum(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += dist[i * n + j];
    row_sum[i] = acc;
    total += acc;
  }
  total *= 0.5;

  std::vector<std::uint32_t> group_a(na);
  for (std::size_t i = 0; i < na; ++i) group_a[i] = static_cast<std::uint32_t>(i);
  rep.energy_statistic = energy_stat_from_group_a(dist, n, group_a, row_sum, total, nb);

  std::vector<std::uint32_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<std::uint32_t>(i);
  int exceed = 0;
  for (int p = 0; p < permutations; ++p) {
    // Partial Fisher-Yates: the first na entries become the permuted group A.
    for (std::size_t i = 0; i < na; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(perm[i], perm[j]);
    }
    group_a.assign(perm.begin(), perm.begin() + na);
    if (energy_stat_from_group_a(dist, n, group_a, row_sum, total, nb) >= rep.energy_statistic) {
      ++exceed;
    }
  }
  rep.p_value = (1.0 + exceed) / (1.0 + permutations);
  return rep;
}

CltReport clt_check(const RWwISModel& model, double lambda, double t, long long trials,
                    std::uint64_t seed, int workers) {
  if (trials < 8) throw std::invalid_argument("clt_check: trials must be >= 8");
  const int d = model.dim;
  const Matrix sigma = asymptotic_covariance(model);
  const Matrix cov = lambda * sigma;
  const Matrix cov_inv = cov.inverse();
  const JumpSampler sampler(model);
  const Vector rho = stationary(model);
  const int m = model.states();

  std::vector<double> c0(trials), c1(trials), r2(trials);
  std::vector<int> states(trials);
  parallel_trials(trials, workers, [&](long long trial) {
    Rng rng(seed, static_cast<std::uint64_t>(trial));
    const WalkState w = single_walk_terminal(sampler, lambda, t, 0, rng);
    const double rt = std::sqrt(t);
    const Eigen::Vector2d x(w.x / rt, d == 2 ? w.y / rt : 0.0);
    c0[trial] = x.x();
    c1[trial] = x.y();
    if (d == 1) {
      r2[trial] = x.x() * x.x() / cov(0, 0);
    } else {
      r2[trial] = x.dot(cov_inv * x);
    }
    states[trial] = w.state;
  });

  CltReport rep;
  rep.trials = trials;
  for (int k = 0; k < d; ++k) {
    const double sd = std::sqrt(cov(k, k));
    rep.ks_coord[k] = ks_statistic(k == 0 ? c0 : c1,
                                   [sd](double x) { return normal_cdf(x / sd); });
  }
  const auto chi2_cdf = [d](double x) {
    if (x <= 0.0) return 0.0;
    return d == 2 ? 1.0 - std::exp(-0.5 * x) : std::erf(std::sqrt(0.5 * x));
  };
  rep.ks_radial = ks_statistic(r2, chi2_cdf);

  std::vector<long long> counts(m, 0);
  for (const int s : states) ++counts[s];
  std::vector<double> expected(m);
  for (int i = 0; i < m; ++i) expected[i] = rho(i) * static_cast<double>(trials);
  for (int i = 0; i < m; ++i) {
    rep.state_tv += 0.5 * std::abs(static_cast<double>(counts[i]) / trials - rho(i));
  }
  if (m > 1) {
    rep.state_chi2_p = chi_square_gof(counts, expected).p_value;
  }
  return rep;
}

}  // namespace rwis

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rwis/mixture.hpp"
#include "rwis/walk.hpp"

using namespace rwis;

namespace {

Matrix sample_cov_x1(const std::vector<MixtureSample>& s) {
  Matrix c = Matrix::Zero(2, 2);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& v : s) mean += v.x1;
  mean /= static_cast<double>(s.size());
  for (const auto& v : s) c += (v.x1 - mean) * (v.x1 - mean).transpose();
  return c / static_cast<double>(s.size() - 1);
}

}  // namespace

TEST_CASE("degenerate mixture has covariance lambda* sigma") {
  const auto model = builtin_model("simple2d");
  const double lam = 0.37;
  const auto law = make_mixture_law(model, point_energy(lam));
  Rng rng(1, 0);
  const auto s = sample_mixture(law, 100000, rng);
  const Matrix c = sample_cov_x1(s);
  const Matrix expect = lam * law.sigma;
  // 3 SE for a variance estimate ~ 3 * var * sqrt(2/n).
  const double tol = 3.0 * expect(0, 0) * std::sqrt(2.0 / s.size());
  CHECK(std::abs(c(0, 0) - expect(0, 0)) < tol);
  CHECK(std::abs(c(1, 1) - expect(1, 1)) < tol);
  CHECK(std::abs(c(0, 1)) < tol);
}

TEST_CASE("mixture covariance identity E[x1 x1'] = E[lambda] sigma") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, uniform_energy_rho_s());
  Rng rng(2, 0);
  const auto s = sample_mixture(law, 1000000, rng);
  const Matrix c1 = sample_cov_x1(s);
  CHECK(std::abs(c1(0, 0) - law.rho_s.mean_lambda * law.sigma(0, 0)) <
        3.5 * c1(0, 0) * std::sqrt(2.0 / s.size()));

  Matrix c2 = Matrix::Zero(2, 2);
  for (const auto& v : s) c2 += v.x2 * v.x2.transpose();
  c2 /= static_cast<double>(s.size());
  CHECK(std::abs(c2(0, 0) - law.rho_s.mean_lambda2 * law.sigma(0, 0)) <
        3.5 * c2(0, 0) * std::sqrt(2.0 / s.size()));
}

TEST_CASE("energies of the two particles are anti-correlated") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, uniform_energy_rho_s());
  Rng rng(3, 0);
  const auto s = sample_mixture(law, 1000000, rng);
  std::vector<double> e1(s.size()), e2(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    e1[i] = s[i].x1.squaredNorm();
    e2[i] = s[i].x2.squaredNorm();
  }
  const auto corr = correlation(e1, e2);  // 99% CI
  CHECK(corr.value < 0.0);
  CHECK(corr.hi < 0.0);
}

TEST_CASE("degenerate mixture density is the product of gaussians") {
  const auto model = builtin_model("simple2d");
  const double lam = 0.6;
  const auto law = make_mixture_law(model, point_energy(lam));
  const Eigen::Vector2d x1(0.3, -0.2), x2(-1.0, 0.4);
  const double got = mixture_density(law, x1, 0, x2, 0);

  const double l2 = std::sqrt(1.0 - lam * lam);
  const Matrix si = law.sigma.inverse();
  const double det = law.sigma.determinant();
  const double g1 = std::exp(-0.5 * x1.dot(si * x1) / lam) / (2 * M_PI * lam * std::sqrt(det));
  const double g2 = std::exp(-0.5 * x2.dot(si * x2) / l2) / (2 * M_PI * l2 * std::sqrt(det));
  CHECK(got == doctest::Approx(g1 * g2).epsilon(1e-12));  // m=1: state factor is 1
}

TEST_CASE("sampler histogram matches the density for the degenerate law") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, point_energy(0.5));
  Rng rng(4, 0);
  const auto s = sample_mixture(law, 1000000, rng);
  // chi-square over a 6x6 grid of x1 cells; exact cell probabilities from
  // the gaussian CDF (sigma = I/2 is diagonal).
  const double sd = std::sqrt(0.5 * law.sigma(0, 0));
  const std::vector<double> edges = {-1e30, -1.0, -0.3, 0.0, 0.3, 1.0, 1e30};
  auto cell_p = [&](int i) {
    return normal_cdf(edges[i + 1] / sd) - normal_cdf(edges[i] / sd);
  };
  std::vector<long long> counts(36, 0);
  for (const auto& v : s) {
    int ix = 0, iy = 0;
    while (v.x1.x() > edges[ix + 1]) ++ix;
    while (v.x1.y() > edges[iy + 1]) ++iy;
    ++counts[ix * 6 + iy];
  }
  std::vector<double> expected(36);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) expected[i * 6 + j] = cell_p(i) * cell_p(j) * s.size();
  }
  CHECK(chi_square_gof(counts, expected).p_value > 0.01);
}

TEST_CASE("continuous mixture density integrates to one") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, uniform_energy_rho_s());
  // sigma = I/2 and the state factor sums away: integrate the radial form
  // int (2 pi r1)(2 pi r2) h dr1 dr2 on a truncated box.
  const double R = 6.0;
  const int n = 160;
  const double hstep = R / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r1 = (i + 0.5) * hstep;
    for (int j = 0; j < n; ++j) {
      const double r2 = (j + 0.5) * hstep;
      const double dens = mixture_density(law, {r1, 0.0}, 0, {r2, 0.0}, 0);
      total += (2 * M_PI * r1) * (2 * M_PI * r2) * dens * hstep * hstep;
    }
  }
  CHECK(std::abs(total - 1.0) <= 1e-3);
}

TEST_CASE("exchange symmetry of the uniform-energy mixture") {
  // lambda^2 ~ U(0,1) is symmetric under lambda^2 -> 1 - lambda^2, so
  // swapping the particles leaves the law invariant.
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, uniform_energy_rho_s());
  Rng rng(5, 0);
  auto a = sample_mixture(law, 4000, rng);
  auto b = sample_mixture(law, 4000, rng);
  for (auto& v : b) {
    std::swap(v.x1, v.x2);
    std::swap(v.u1, v.u2);
  }
  Rng prng(6, 0);
  const auto rep = two_sample_fit(a, b, 199, prng, model.grid, 1000);
  CHECK(rep.p_value > 0.01);
}

TEST_CASE("null calibration of the permutation test") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, uniform_energy_rho_s());
  int rejections = 0;
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng(7, rep);
    const auto a = sample_mixture(law, 600, rng);
    const auto b = sample_mixture(law, 600, rng);
    Rng prng(8, rep);
    const auto fit = two_sample_fit(a, b, 99, prng, model.grid, 600);
    CHECK(fit.p_value >= 0.0);
    CHECK(fit.p_value <= 1.0);
    CHECK(fit.permutations == 99);
    if (fit.p_value < 0.01) ++rejections;
  }
  CHECK(rejections <= 1);
}

TEST_CASE("fixed-energy product gaussians are rejected against the mixture") {
  const auto model = builtin_model("simple2d");
  const auto mixture = make_mixture_law(model, uniform_energy_rho_s());
  // Product alternative: both coordinates at the median split of rho_s.
  const double lam_med = std::sqrt(0.5);  // CDF x^2 -> median sqrt(1/2)
  const auto alt = make_mixture_law(model, point_energy(lam_med));
  Rng rng(9, 0);
  const auto a = sample_mixture(mixture, 12000, rng);
  const auto b = sample_mixture(alt, 12000, rng);
  Rng prng(10, 0);
  const auto fit = two_sample_fit(a, b, 199, prng, model.grid, 6000);
  CHECK(fit.p_value < 0.01);
  // The alternative lacks the energy anti-correlation.
  CHECK(fit.energy_corr_a.hi < 0.0);
  CHECK(std::abs(fit.energy_corr_b.value) < 0.02);
  CHECK_FALSE(fit.corr_signs_agree);
}

TEST_CASE("clt check: simple walk radial and coordinate fits") {
  const auto model = builtin_model("simple2d");
  const auto rep = clt_check(model, 1.0, 1000.0, 20000, 11, 2);
  CHECK(rep.ks_coord[0] < 0.02);
  CHECK(rep.ks_coord[1] < 0.02);
  CHECK(rep.ks_radial < 0.02);
  CHECK(rep.state_tv == 0.0);  // m = 1
}

TEST_CASE("clt check: internal states of the directional walk hit rho") {
  const auto model = builtin_model("directional2d");
  const auto rep = clt_check(model, 0.8, 1250.0, 20000, 12, 2);
  CHECK(rep.state_chi2_p > 0.001);
  CHECK(rep.ks_radial < 0.02);
}

TEST_CASE("time-rate scaling: rate lambda at t equals rate 1 at lambda t") {
  const auto model = builtin_model("simple2d");
  const JumpSampler sampler(model);
  const long long trials = 10000;
  std::vector<double> fast(trials), slow(trials);
  parallel_trials(trials, 2, [&](long long i) {
    Rng r1(13, i), r2(14, i);
    fast[i] = static_cast<double>(single_walk_terminal(sampler, 0.5, 2000.0, 0, r1).x);
    slow[i] = static_cast<double>(single_walk_terminal(sampler, 1.0, 1000.0, 0, r2).x);
  });
  const double ks = ks_two_sample(fast, slow);
  CHECK(ks_two_sample_pvalue(ks, trials, trials) > 0.01);
}

TEST_CASE("mixture density rejects laws without a usable representation") {
  const auto model = builtin_model("simple2d");
  auto law = make_mixture_law(model, uniform_energy_rho_s());
  law.rho_s.atoms.clear();
  law.rho_s.density = nullptr;
  CHECK_THROWS_AS((void)mixture_density(law, {1, 0}, 0, {0, 1}, 0), std::invalid_argument);
}

TEST_CASE("empirical rho_s atoms feed the density sum") {
  const auto model = builtin_model("simple2d");
  const auto law = make_mixture_law(model, empirical_energy({0.6, 0.6, 0.6}));
  const auto point_law = make_mixture_law(model, point_energy(0.6));
  const Eigen::Vector2d x1(0.5, 0.5), x2(-0.25, 1.0);
  CHECK(mixture_density(law, x1, 0, x2, 0) ==
        doctest::Approx(mixture_density(point_law, x1, 0, x2, 0)).epsilon(1e-12));
}

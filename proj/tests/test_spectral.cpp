#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "rwis/model.hpp"
#include "rwis/rng.hpp"
#include "rwis/spectral.hpp"

using namespace rwis;
using cplx = std::complex<double>;

TEST_CASE("fourier symbol values of the simple walk") {
  const auto m = builtin_model("simple2d");
  CHECK(std::abs(fourier_symbol(m, {0.0, 0.0})(0, 0) - 1.0) < 1e-15);
  // (e^{i pi} + e^{-i pi})/4 + (e^0 + e^0)/4 = -1/2 + 1/2.
  CHECK(std::abs(fourier_symbol(m, {M_PI, 0.0})(0, 0)) < 1e-12);
}

TEST_CASE("symbol conjugation symmetry") {
  Rng rng(5, 5);
  for (const auto& name : {"persistent1d", "directional2d", "skewed2d"}) {
    const auto model = builtin_model(name);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::Vector2d s(rng.uniform() * 6 - 3, rng.uniform() * 6 - 3);
      const ComplexMatrix a = fourier_symbol(model, s);
      const ComplexMatrix b = fourier_symbol(model, -s);
      CHECK((a.conjugate() - b).cwiseAbs().maxCoeff() < 1e-14);
      // Row sums of |alpha| stay bounded by 1.
      CHECK(a.cwiseAbs().rowwise().sum().maxCoeff() <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("leading eigenvalue of the simple walk is the cosine symbol") {
  const auto m = builtin_model("simple2d");
  CHECK(std::abs(leading_eigenvalue(m, {0, 0}) - 1.0) < 1e-15);
  for (const double s1 : {0.2, 0.9, 2.0}) {
    for (const double s2 : {-0.4, 1.1}) {
      const cplx chi = leading_eigenvalue(m, {s1, s2});
      CHECK(std::abs(chi - 0.5 * (std::cos(s1) + std::cos(s2))) < 1e-12);
    }
  }
}

TEST_CASE("persistent walk branch matches the quadratic-formula oracle") {
  const auto m = builtin_model("persistent1d");
  const double p = 0.7;
  // alpha(s) has trace 2p cos s and determinant p^2 - (1-p)^2; the branch
  // through 1 is the + root while the discriminant stays positive.
  for (const double s : {0.01, 0.1, 0.25, 0.4}) {
    const double tr = 2.0 * p * std::cos(s);
    const double det = p * p - (1 - p) * (1 - p);
    const double disc = tr * tr / 4.0 - det;
    REQUIRE(disc > 0.0);
    const double oracle = tr / 2.0 + std::sqrt(disc);
    CHECK(std::abs(leading_eigenvalue(m, {s, 0}) - oracle) < 1e-10);
  }
}

TEST_CASE("branch tracking refuses to cross the eigenvalue collision") {
  // For the persistent walk the two branches collide where the discriminant
  // vanishes, cos^2 s = det / p^2.
  const auto m = builtin_model("persistent1d");
  const double s_collide = std::acos(std::sqrt(0.4) / 0.7);
  CHECK_THROWS_AS((void)leading_eigenvalue(m, {s_collide + 0.3, 0.0}), branch_error);
}

TEST_CASE("expansion coefficients of the simple 1d walk") {
  const auto e = expansion_coeffs(builtin_model("simple1d"));
  CHECK(e.r2() == doctest::Approx(-1.0).epsilon(1e-10));
  CHECK(std::abs(e.r3()) < 1e-9);
}

TEST_CASE("expansion r2 equals minus the asymptotic variance") {
  const auto m = builtin_model("persistent1d");
  const auto e = expansion_coeffs(m);
  const Matrix sigma = asymptotic_covariance(m);
  CHECK(e.r2() == doctest::Approx(-sigma(0, 0)).epsilon(1e-8));
  CHECK(std::abs(e.r3()) < 1e-9);  // mirror symmetry kills the third order
}

TEST_CASE("expansion quadratic form of 2d builtins") {
  for (const auto& name : {"simple2d", "directional2d", "skewed2d"}) {
    const auto m = builtin_model(name);
    const auto e = expansion_coeffs(m);
    const Matrix sigma = asymptotic_covariance(m);
    CHECK((e.quadratic - sigma).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((e.quadratic_fd - sigma).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("skewed model cubic tensor equals minus i times the third moments") {
  const auto e = expansion_coeffs(builtin_model("skewed2d"));
  // E[x1^2 x2] = 1/2, all other third moments vanish.
  CHECK(std::abs(e.r3(0, 0, 1) - cplx(0.0, -0.5)) < 1e-9);
  CHECK(std::abs(e.r3(0, 1, 0) - cplx(0.0, -0.5)) < 1e-9);
  CHECK(std::abs(e.r3(0, 0, 0)) < 1e-9);
  CHECK(std::abs(e.r3(1, 1, 1)) < 1e-9);
  CHECK(std::abs(e.r3(0, 1, 1)) < 1e-9);
}

TEST_CASE("exact law at t=0 is a point mass") {
  const auto law = exact_distribution(builtin_model("persistent1d"), 0.0, 3, 1);
  CHECK(law.at(0, 0, 1) == doctest::Approx(1.0));
  CHECK(law.site_mass(0) == doctest::Approx(1.0));
  CHECK(law.site_mass(1) == doctest::Approx(0.0));
  CHECK(law.tabulated_mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("simple 1d walk at lambda t = 1 against the Poisson-binomial series") {
  // h_{t,0} = e^{-1} sum_{n even} (1/n!) C(n, n/2) 2^{-n}.
  double oracle = 0.0;
  double fact = 1.0;
  for (int n = 0; n <= 20; ++n) {
    if (n > 0) fact *= n;
    if (n % 2 == 0) {
      double binom = 1.0;
      for (int k = 0; k < n / 2; ++k) binom = binom * (n - k) / (k + 1);
      oracle += binom * std::pow(0.5, n) / fact * std::exp(-1.0);
    }
  }
  CHECK(oracle == doctest::Approx(0.4658).epsilon(1e-3));

  const auto law = exact_distribution(builtin_model("simple1d"), 1.0, 12, 0);
  CHECK(law.site_mass(0) == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(law.tabulated_mass() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("inversion agrees with the direct Poissonized matrix-power series") {
  // Discrete convolution powers of the persistent walk on a window, mixed
  // with Poisson(lambda t) weights truncated at a 10-sigma tail.
  const auto model = builtin_model("persistent1d");
  const double lam_t = 4.0;
  const int W = 40;
  const int nmax = static_cast<int>(lam_t + 10.0 * std::sqrt(lam_t)) + 10;

  // state-resolved pmf over x in [-W, W]: h[x][v]
  std::vector<std::vector<double>> cur(2 * W + 1, std::vector<double>(2, 0.0));
  cur[W][0] = 1.0;  // start at origin, state 0
  std::vector<std::vector<double>> mix(2 * W + 1, std::vector<double>(2, 0.0));
  double pois = std::exp(-lam_t);
  for (int x = 0; x <= 2 * W; ++x) {
    for (int v = 0; v < 2; ++v) mix[x][v] += pois * cur[x][v];
  }
  const auto& jumps = model.jumps;
  for (int n = 1; n <= nmax; ++n) {
    std::vector<std::vector<double>> next(2 * W + 1, std::vector<double>(2, 0.0));
    for (int x = 0; x <= 2 * W; ++x) {
      for (int u = 0; u < 2; ++u) {
        const double mass = cur[x][u];
        if (mass == 0.0) continue;
        for (const auto& j : jumps) {
          const int nx = x + j.step.x();
          if (nx < 0 || nx > 2 * W) continue;
          for (int v = 0; v < 2; ++v) next[nx][v] += mass * j.weights(u, v);
        }
      }
    }
    cur.swap(next);
    pois *= lam_t / n;
    for (int x = 0; x <= 2 * W; ++x) {
      for (int v = 0; v < 2; ++v) mix[x][v] += pois * cur[x][v];
    }
  }

  const auto law = exact_distribution(model, 4.0, W, 0);
  double max_dev = 0.0;
  for (int x = -W; x <= W; ++x) {
    for (int v = 0; v < 2; ++v) {
      max_dev = std::max(max_dev, std::abs(law.at(x, 0, v) - mix[x + W][v]));
    }
  }
  CHECK(max_dev < 1e-9);
}

TEST_CASE("window too small raises a window error with a suggestion") {
  try {
    (void)exact_distribution(builtin_model("simple1d"), 100.0, 4, 0);
    FAIL("expected window error");
  } catch (const window_error& e) {
    CHECK(e.suggested_window > 4);
  }
}

TEST_CASE("llt error is nonnegative and decays at the theorem rate") {
  const auto model = builtin_model("persistent1d");
  std::vector<double> ts = {100, 400, 1600};
  std::vector<double> sups, sums;
  for (const double t : ts) {
    const auto r = llt_error(model, t);
    CHECK(r.error_sum >= 0.0);
    CHECK(r.error_sup >= 0.0);
    sups.push_back(r.error_sup);
    sums.push_back(r.error_sum);
  }
  const auto fit = fit_rate(ts, sups);
  // d = 1: -(d+1)/2 = -1.
  CHECK(fit.exponent == doctest::Approx(-1.0).epsilon(0.3));
  // The summed error carries the O(1) initial-state offset term at rate -1/2.
  const auto fit_sum = fit_rate(ts, sums);
  CHECK(fit_sum.exponent < -0.3);
}

TEST_CASE("2d skewed model llt sup error decays at rate -3/2") {
  const auto model = builtin_model("skewed2d");
  std::vector<double> ts = {25, 50, 100};
  std::vector<double> sups;
  for (const double t : ts) sups.push_back(llt_error(model, t).error_sup);
  const auto fit = fit_rate(ts, sups);
  CHECK(fit.exponent > -1.9);
  CHECK(fit.exponent < -1.1);
}

TEST_CASE("drifted comparison is a negative control: no decay") {
  // Exact law of a drifted walk compared against the centered Gaussian; the
  // l1 deviation must not decay.
  RWwISModel m;
  m.dim = 1;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.name = "drift1d";
  m.jumps = {{{1, 0}, Matrix::Constant(1, 1, 0.6)}, {{-1, 0}, Matrix::Constant(1, 1, 0.4)}};
  CHECK_THROWS_AS((void)asymptotic_covariance(m), std::domain_error);

  auto err_sum = [&](double t) {
    const int W = static_cast<int>(8 * std::sqrt(t)) + 30;
    const auto law = exact_distribution(m, t, W, 0);
    const double var = 1.0 - 0.2 * 0.2;  // per-step variance of the drifted jump
    double s = 0.0;
    for (int x = -W; x <= W; ++x) {
      const double g = std::exp(-x * x / (2.0 * t * var)) / std::sqrt(2 * M_PI * t * var);
      s += std::abs(law.site_mass(x) - g);
    }
    return s;
  };
  const double e1 = err_sum(50.0), e2 = err_sum(200.0);
  CHECK(e2 > 0.8 * e1);
}

TEST_CASE("first-return tail of the simple walk approaches pi over log") {
  const auto model = builtin_model("simple2d");
  const std::vector<double> grid = {100.0, 1000.0, 10000.0};
  const auto res = first_return_tail(model, grid, 20000, 12345, 2);
  CHECK(res.constant == doctest::Approx(M_PI).epsilon(1e-12));
  // Kaplan-Meier style monotonicity.
  CHECK(res.points[0].tail >= res.points[1].tail);
  CHECK(res.points[1].tail >= res.points[2].tail);
  // Slow convergence from below toward pi.
  CHECK(res.points[2].tail_times_log > 0.5 * M_PI);
  CHECK(res.points[2].tail_times_log < 1.05 * M_PI);
  CHECK(res.points[2].tail_times_log > res.points[0].tail_times_log);
  for (const auto& p : res.points) CHECK_FALSE(p.low_survivors);
}

TEST_CASE("first-return scaling: doubling the rate halves the clock") {
  auto fast = builtin_model("simple2d");
  fast.rate = 2.0;
  const std::vector<double> t_slow = {2000.0};
  const std::vector<double> t_fast = {1000.0};
  const auto slow_res = first_return_tail(builtin_model("simple2d"), t_slow, 30000, 77, 2);
  const auto fast_res = first_return_tail(fast, t_fast, 30000, 78, 2);
  const double p1 = slow_res.points[0].tail, p2 = fast_res.points[0].tail;
  const double se = std::sqrt(p1 * (1 - p1) / 30000.0 + p2 * (1 - p2) / 30000.0);
  CHECK(std::abs(p1 - p2) < 3.5 * se);
}

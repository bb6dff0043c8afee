#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "rwis/collision.hpp"
#include "rwis/stattest.hpp"

using namespace rwis;

TEST_CASE("uniform kernel outgoing speed has cdf x^2") {
  const auto kernel = CollisionKernel::uniform_energy();
  Rng rng(1, 0);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = kernel.sample_energy(0.37, rng);
  const double ks = ks_statistic(draws, [](double x) { return std::clamp(x, 0.0, 1.0) * x; });
  CHECK(ks <= 0.01);
}

TEST_CASE("deterministic swap maps 0.6 to 0.8") {
  const auto kernel = CollisionKernel::deterministic_swap();
  Rng rng(2, 0);
  CHECK(kernel.sample_energy(0.6, rng) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("energy conservation and lambda-tilde bounds") {
  Rng rng(3, 0);
  for (const auto& kernel : {CollisionKernel::uniform_energy(), CollisionKernel::sticky_beta(4.0),
                             CollisionKernel::deterministic_swap()}) {
    double lam = 0.42;
    for (int i = 0; i < 5000; ++i) {
      lam = kernel.sample_energy(lam, rng);
      const EnergySplit split{lam};
      CHECK(lam * lam + split.lambda2() * split.lambda2() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(split.lambda_tilde() >= 1.0 - 1e-12);
      CHECK(split.lambda_tilde() <= std::sqrt(2.0) + 1e-12);
    }
  }
}

TEST_CASE("one-step push-forward of rho_s stays rho_s for the uniform kernel") {
  const auto kernel = CollisionKernel::uniform_energy();
  Rng rng(4, 0);
  std::vector<double> draws(100000);
  for (auto& d : draws) {
    const double from = sample_stationary_energy(kernel, rng);
    d = kernel.sample_energy(from, rng);
  }
  const double ks = ks_statistic(draws, *kernel.stationary_cdf());
  CHECK(ks <= 0.01);
}

TEST_CASE("long-run sticky chain forgets its start") {
  const EnergyChain chain{CollisionKernel::sticky_beta(4.0)};
  const auto est = stationary_energy(chain, StationaryMethod::LongRun, 1000000, 99);
  CHECK_FALSE(est.closed_form);
  CHECK(est.two_start_ks <= 0.02);
  CHECK_FALSE(est.diagnostic_flagged);
}

TEST_CASE("closed-form request on a kernel without one is an error") {
  const EnergyChain chain{CollisionKernel::sticky_beta(4.0)};
  CHECK_THROWS_AS((void)stationary_energy(chain, StationaryMethod::ClosedForm, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("deterministic swap is flagged as non-ergodic") {
  const EnergyChain chain{CollisionKernel::deterministic_swap()};
  const auto diag = ergodicity_diagnostic(chain, 0.2, 0.7, {1, 5, 20, 50}, 4000, 5);
  CHECK_FALSE(diag.decays);
  CHECK(diag.distance.back() > 0.5);
}

TEST_CASE("uniform kernel forgets in one step") {
  const EnergyChain chain{CollisionKernel::uniform_energy()};
  const auto diag = ergodicity_diagnostic(chain, 0.1, 0.9, {1, 5, 20}, 8000, 6);
  CHECK(diag.decays);
  for (const double d : diag.distance) CHECK(d < 0.04);
}

TEST_CASE("sticky chain distance decays below 0.05 by n = 50") {
  const EnergyChain chain{CollisionKernel::sticky_beta(4.0)};
  const auto diag = ergodicity_diagnostic(chain, 0.05, 0.95, {1, 5, 15, 50}, 8000, 7);
  CHECK(diag.decays);
  CHECK(diag.distance.front() > diag.distance.back());
  CHECK(diag.distance.back() < 0.05);
  CHECK(diag.decay_rate > 0.0);
}

TEST_CASE("transient mixture with F = 0 is a point mass") {
  const EnergyChain chain{CollisionKernel::uniform_energy()};
  const auto mix = transient_mixture(chain, 0.0, 0.35, 0, 2000, 11);
  for (const double v : mix.sample) CHECK(v == doctest::Approx(0.35));
}

TEST_CASE("transient mixture of the one-step-forgetting kernel") {
  // g^n = g for n >= 1, so rho~ = (1-F) delta_{lambda0} + F (x^2 law).
  const double F = 0.4, lam0 = 0.25;
  const EnergyChain chain{CollisionKernel::uniform_energy()};
  const long long n = 200000;
  const auto mix = transient_mixture(chain, F, lam0, transient_mixture_order(F), n, 12);
  CHECK(mix.truncated_mass <= 1e-9);
  long long at_start = 0;
  std::vector<double> moved;
  for (const double v : mix.sample) {
    if (v == lam0) {
      ++at_start;
    } else {
      moved.push_back(v);
    }
  }
  const double frac = static_cast<double>(at_start) / n;
  CHECK(std::abs(frac - (1.0 - F)) < 3.0 * std::sqrt(F * (1 - F) / n));
  const double ks = ks_statistic(moved, [](double x) { return std::clamp(x, 0.0, 1.0) * x; });
  CHECK(ks < 0.01);
}

TEST_CASE("transient mixture approaches rho_s as F -> 1") {
  const EnergyChain chain{CollisionKernel::uniform_energy()};
  const double F = 0.999;
  const auto mix = transient_mixture(chain, F, 0.9, transient_mixture_order(F), 50000, 13);
  const double ks = ks_statistic(mix.sample, [](double x) { return std::clamp(x, 0.0, 1.0) * x; });
  CHECK(ks <= 0.05);
}

TEST_CASE("invalid return probability is rejected") {
  const EnergyChain chain{CollisionKernel::uniform_energy()};
  CHECK_THROWS_AS((void)transient_mixture(chain, 1.0, 0.5, 10, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)transient_mixture(chain, 0.5, 0.5, 3, 10, 1), std::invalid_argument);
}

TEST_CASE("tabulated kernel loads, normalizes rows and samples accordingly") {
  const std::string path = "tab_kernel_test.csv";
  {
    std::ofstream out(path);
    out << "lambda_minus_bin,lambda_plus_bin,mass\n";
    // Two bins: from bin 0 go to bin 1 w.p. 3/4; from bin 1 stay w.p. 1.
    out << "0,0,1.0\n0,1,3.0\n1,1,5.0\n";
  }
  const auto kernel = CollisionKernel::tabulated_from_csv(path, 2);
  Rng rng(5, 0);
  long long hi = 0;
  const int n = 40000;
  for (int i = 0; i < n; ++i) {
    if (kernel.sample_energy(0.2, rng) >= 0.5) ++hi;
  }
  const double frac = static_cast<double>(hi) / n;
  CHECK(std::abs(frac - 0.75) < 3.0 * std::sqrt(0.25 * 0.75 / n));
  for (int i = 0; i < 100; ++i) CHECK(kernel.sample_energy(0.8, rng) >= 0.5);
  std::remove(path.c_str());
}

TEST_CASE("collision outcome respects the displacement range and moves someone") {
  const auto model = builtin_model("directional2d");
  const CollisionSampler sampler(CollisionKernel::uniform_energy(), model);
  Rng rng(6, 0);
  for (int i = 0; i < 20000; ++i) {
    const auto c = sampler.sample(0.5, rng);
    CHECK(std::max(std::abs(c.z1.x()), std::abs(c.z1.y())) <= 1);
    CHECK(std::max(std::abs(c.z2.x()), std::abs(c.z2.y())) <= 1);
    CHECK((c.z1 != LatticeVector(0, 0) || c.z2 != LatticeVector(0, 0)));
    CHECK(c.direction1 >= 0);
    CHECK(c.direction1 < 4);
  }
}

TEST_CASE("outgoing directions follow the stationary law") {
  const auto model = builtin_model("directional2d");  // rho = (1/4,...)
  const CollisionSampler sampler(CollisionKernel::uniform_energy(), model);
  Rng rng(7, 0);
  std::vector<long long> counts(4, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[sampler.sample(0.5, rng).direction1];
  std::vector<double> expected(4, n / 4.0);
  CHECK(chi_square_gof(counts, expected).p_value > 0.001);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "rwis/rng.hpp"
#include "rwis/stattest.hpp"

using namespace rwis;

TEST_CASE("streams are reproducible and distinct") {
  Rng a(42, 7), b(42, 7), c(42, 8);
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("uniform moments") {
  Rng rng(1, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    s += u;
    s2 += u * u;
  }
  const double mean = s / n;
  const double var = s2 / n - mean * mean;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("below is uniform") {
  Rng rng(3, 1);
  const int bins = 10, n = 100000;
  std::vector<long long> counts(bins, 0);
  for (int i = 0; i < n; ++i) ++counts[rng.below(bins)];
  std::vector<double> expected(bins, static_cast<double>(n) / bins);
  const auto r = chi_square_gof(counts, expected);
  CHECK(r.p_value > 0.001);
}

TEST_CASE("normal, exponential, gamma, beta, poisson moments") {
  Rng rng(11, 2);
  const int n = 200000;
  double sn = 0, sn2 = 0, se = 0, sg = 0, sg2 = 0, sb = 0;
  double sp = 0, sp2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    se += rng.exponential(2.0);
    const double g = rng.gamma(3.5);
    sg += g;
    sg2 += g * g;
    sb += rng.beta(2.0, 3.0);
  }
  for (int i = 0; i < 20000; ++i) {
    const double p = static_cast<double>(rng.poisson(50.0));
    sp += p;
    sp2 += p * p;
  }
  CHECK(sn / n == doctest::Approx(0.0).epsilon(1).scale(0.01));
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(se / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sg / n == doctest::Approx(3.5).epsilon(0.02));
  CHECK(sg2 / n - (sg / n) * (sg / n) == doctest::Approx(3.5).epsilon(0.05));
  CHECK(sb / n == doctest::Approx(0.4).epsilon(0.02));
  CHECK(sp / 20000 == doctest::Approx(50.0).epsilon(0.01));
  CHECK(sp2 / 20000 - (sp / 20000) * (sp / 20000) == doctest::Approx(50.0).epsilon(0.05));
}

TEST_CASE("poisson small-mean inversion matches pmf") {
  Rng rng(5, 9);
  const double mean = 3.0;
  const int n = 200000;
  std::vector<long long> counts(12, 0);
  for (int i = 0; i < n; ++i) {
    const long long k = rng.poisson(mean);
    if (k < 11) {
      ++counts[k];
    } else {
      ++counts[11];
    }
  }
  std::vector<double> expected(12);
  double tail = 1.0;
  double pk = std::exp(-mean);
  for (int k = 0; k < 11; ++k) {
    expected[k] = pk * n;
    tail -= pk;
    pk *= mean / (k + 1);
  }
  expected[11] = std::max(tail, 1e-12) * n;
  const auto r = chi_square_gof(counts, expected);
  CHECK(r.p_value > 0.001);
}

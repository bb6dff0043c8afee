#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "rwis/model.hpp"
#include "rwis/rng.hpp"
#include "rwis/walk.hpp"

using namespace rwis;

namespace {

// Independent stationary-vector oracle: plain power iteration.
Vector power_iteration_stationary(const Matrix& q, int iters = 20000) {
  Vector v = Vector::Constant(q.rows(), 1.0 / q.rows());
  for (int i = 0; i < iters; ++i) {
    v = (v.transpose() * q).transpose();
    v /= v.sum();
  }
  return v;
}

// Independent lattice oracle: breadth-first reachability of e1 (and e2) by
// integer combinations with coefficients in [-6, 6].
bool lattice_brute_force(const std::vector<Jump>& jumps, int dim) {
  std::set<std::pair<int, int>> reach{{0, 0}};
  for (int round = 0; round < 8; ++round) {
    std::set<std::pair<int, int>> next = reach;
    for (const auto& r : reach) {
      for (const auto& j : jumps) {
        for (int sgn : {1, -1}) {
          int nx = r.first + sgn * j.step.x();
          int ny = r.second + sgn * j.step.y();
          if (std::abs(nx) <= 6 && std::abs(ny) <= 6) next.insert({nx, ny});
        }
      }
    }
    reach.swap(next);
  }
  const bool e1 = reach.count({1, 0}) > 0;
  const bool e2 = reach.count({0, 1}) > 0;
  return dim == 1 ? e1 : (e1 && e2);
}

}  // namespace

TEST_CASE("simple symmetric 2d model validates with zero gap and drift") {
  const auto m = builtin_model("simple2d");
  const auto rep = validate(m);
  CHECK(rep.all_pass());
  for (const auto& c : rep.checks) {
    if (c.name == "spectral_gap") CHECK(c.value == doctest::Approx(0.0));
    if (c.name == "no_drift") CHECK(c.value <= 1e-12);
  }
}

TEST_CASE("deterministic drift model fails the drift condition") {
  RWwISModel m;
  m.dim = 1;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.jumps = {{{1, 0}, Matrix::Constant(1, 1, 1.0)}};
  const auto rep = validate(m);
  CHECK_FALSE(rep.all_pass());
  bool lattice_ok = false, drift_fail = false;
  for (const auto& c : rep.checks) {
    if (c.name == "lattice_generates") lattice_ok = c.pass;
    if (c.name == "no_drift") drift_fail = !c.pass && std::abs(c.value - 1.0) < 1e-12;
  }
  CHECK(lattice_ok);
  CHECK(drift_fail);
}

TEST_CASE("persistent walk stationary law and drift") {
  const auto m = builtin_model("persistent1d");
  const auto rep = validate(m);
  CHECK(rep.all_pass());
  const Vector rho = stationary(m);
  CHECK(rho(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rho(1) == doctest::Approx(0.5).epsilon(1e-12));

  const auto ms = moments(m);
  const Vector m_one = ms.M_(0) * Vector::Ones(2);
  CHECK(m_one(0) == doctest::Approx(0.4));
  CHECK(m_one(1) == doctest::Approx(-0.4));
}

TEST_CASE("stationary of a random 3-state chain matches power iteration") {
  Rng rng(99, 0);
  Matrix q(3, 3);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 3; ++j) {
      q(i, j) = 0.05 + rng.uniform();
      s += q(i, j);
    }
    q.row(i) /= s;
  }
  const Vector rho = stationary(q);
  const Vector oracle = power_iteration_stationary(q);
  CHECK((rho - oracle).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((rho.transpose() * q - rho.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moments of the simple walk") {
  const auto ms = moments(builtin_model("simple2d"));
  CHECK(ms.M_(0)(0, 0) == doctest::Approx(0.0));
  CHECK(ms.M_(1)(0, 0) == doctest::Approx(0.0));
  CHECK(ms.Sigma_(0, 0)(0, 0) == doctest::Approx(0.5));
  CHECK(ms.Sigma_(1, 1)(0, 0) == doctest::Approx(0.5));
  CHECK(ms.Sigma_(0, 1)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("mean one-step displacement matches a direct Monte Carlo draw") {
  for (const auto& name : {"persistent1d", "directional2d", "skewed2d"}) {
    const auto model = builtin_model(name);
    const auto ms = moments(model);
    const Vector ones = Vector::Ones(model.states());
    const JumpSampler sampler(model);
    Rng rng(7, 1234);
    const long long n = 400000;
    // Draw the incoming state from rho, then one jump.
    std::vector<double> cdf(model.states());
    double acc = 0;
    for (int i = 0; i < model.states(); ++i) cdf[i] = (acc += ms.rho(i));
    double mean[2] = {0, 0};
    for (long long i = 0; i < n; ++i) {
      const double r = rng.uniform();
      int u = 0;
      while (cdf[u] < r) ++u;
      const auto o = sampler.sample(u, rng);
      mean[0] += o.dx;
      mean[1] += o.dy;
    }
    for (int l = 0; l < model.dim; ++l) {
      const double expect = ms.rho.dot(ms.M_(l) * ones);
      const double got = mean[l] / n;
      // 3 sigma with per-step variance bounded by 1.
      CHECK(std::abs(got - expect) < 3.0 / std::sqrt(static_cast<double>(n)));
    }
  }
}

TEST_CASE("asymptotic covariance of the simple walk is diag(1/2,1/2)") {
  const Matrix s = asymptotic_covariance(builtin_model("simple2d"));
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("persistent walk covariance matches the classical value and Monte Carlo") {
  const auto model = builtin_model("persistent1d");
  const Matrix s = asymptotic_covariance(model);
  CHECK(s(0, 0) == doctest::Approx(7.0 / 3.0).epsilon(1e-12));

  // Long-run simulation oracle: Var(eta_t) / (lambda t) within 2%.
  const JumpSampler sampler(model);
  const double horizon = 2000.0;
  const long long trials = 20000;
  double sum = 0.0, sum2 = 0.0;
  Rng rng(2024, 0);
  for (long long i = 0; i < trials; ++i) {
    const auto w = single_walk_terminal(sampler, model.rate, horizon, i % 2, rng);
    sum += static_cast<double>(w.x);
    sum2 += static_cast<double>(w.x) * w.x;
  }
  const double mean = sum / trials;
  const double var = sum2 / trials - mean * mean;
  CHECK(var / horizon == doctest::Approx(7.0 / 3.0).epsilon(0.02));
}

TEST_CASE("covariance is exactly symmetric for every builtin") {
  for (const auto& name : builtin_model_names()) {
    const auto model = builtin_model(name);
    if (!validate(model).all_pass()) continue;
    const Matrix s = asymptotic_covariance(model);
    CHECK(s(0, s.cols() - 1) == s(s.rows() - 1, 0));
  }
}

TEST_CASE("lattice generation against the brute-force oracle") {
  const auto w1 = Matrix::Constant(1, 1, 0.5);
  std::vector<Jump> axes = {{{1, 0}, w1}, {{-1, 0}, w1}, {{0, 1}, w1}, {{0, -1}, w1}};
  CHECK(lattice_spans(axes, 2));
  CHECK(lattice_brute_force(axes, 2));

  std::vector<Jump> even = {{{2, 0}, w1}, {{-2, 0}, w1}};
  CHECK_FALSE(lattice_spans(even, 1));
  CHECK_FALSE(lattice_brute_force(even, 1));

  std::vector<Jump> checker = {{{1, 1}, w1}, {{1, -1}, w1}};
  CHECK_FALSE(lattice_spans(checker, 2));
  CHECK_FALSE(lattice_brute_force(checker, 2));

  std::vector<Jump> skew = {{{1, 1}, w1}, {{-1, 1}, w1}, {{0, -1}, w1}};
  CHECK(lattice_spans(skew, 2));
  CHECK(lattice_brute_force(skew, 2));
}

TEST_CASE("non-stochastic rows are a hard failure") {
  RWwISModel m;
  m.dim = 1;
  m.grid.arcs = 1;
  m.rate = 1.0;
  m.jumps = {{{1, 0}, Matrix::Constant(1, 1, 0.3)}, {{-1, 0}, Matrix::Constant(1, 1, 0.3)}};
  CHECK_THROWS_AS(validate(m), std::invalid_argument);
}

TEST_CASE("model files round-trip") {
  for (const auto& name : builtin_model_names()) {
    const auto model = builtin_model(name);
    std::istringstream in(format_model(model));
    const auto back = parse_model(in, "mem");
    CHECK(back.dim == model.dim);
    CHECK(back.grid.arcs == model.grid.arcs);
    CHECK(back.rate == doctest::Approx(model.rate));
    REQUIRE(back.jumps.size() == model.jumps.size());
    for (std::size_t i = 0; i < model.jumps.size(); ++i) {
      CHECK(back.jumps[i].step == model.jumps[i].step);
      CHECK((back.jumps[i].weights - model.jumps[i].weights).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("loader reports line-precise errors") {
  {
    std::istringstream in("d = 2\nm = 2\nrate = 1\n\n[jump 1 0]\n0.5 0.5\n0.25 0.25 0.25\n");
    try {
      parse_model(in, "f.model");
      FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("f.model:7") != std::string::npos);
    }
  }
  {
    std::istringstream in("d = 2\nm = 1\nrate = 1\n[jump 2 0]\n1.0\n");
    try {
      parse_model(in, "g.model");
      FAIL("expected range error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("g.model:4") != std::string::npos);
      CHECK(std::string(e.what()).find("bounded range") != std::string::npos);
    }
  }
  {
    std::istringstream in("d = 1\nm = 1\nrate = 1\n[jump 1]\n0.4\n[jump -1]\n0.4\n");
    CHECK_THROWS_WITH_AS(parse_model(in, "h.model"),
                         doctest::Contains("not row-stochastic"), std::runtime_error);
  }
}

TEST_CASE("difference model of the simple walk is the simple walk at the summed rate") {
  const auto base = builtin_model("simple2d");
  const auto diff = difference_model(base, 0.6, 0.8);
  CHECK(diff.rate == doctest::Approx(1.4));
  CHECK(diff.states() == 1);
  const auto rep = validate(diff);
  CHECK(rep.all_pass());
  const Matrix s = asymptotic_covariance(diff);
  CHECK(s(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("difference model of the persistent-style 2d model validates") {
  const auto base = builtin_model("directional2d");
  const auto diff = difference_model(base, 0.5, std::sqrt(1.0 - 0.25));
  CHECK(diff.states() == 16);
  const auto rep = validate(diff);
  CHECK(rep.all_pass());
}

#include "rwis/stattest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace rwis {

double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / sa.size() -
                             static_cast<double>(j) / sb.size()));
  }
  return d;
}

double kolmogorov_cdf(double x) {
  if (x <= 0.05) return 0.0;
  if (x > 8.0) return 1.0;
  // K(x) = 1 - 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1) ? term : -term;
    if (term < 1e-16) break;
  }
  return std::clamp(1.0 - 2.0 * s, 0.0, 1.0);
}

double ks_pvalue(double d, std::size_t n) {
  const double rn = std::sqrt(static_cast<double>(n));
  // Stephens-style small-sample correction.
  const double x = d * (rn + 0.12 + 0.11 / rn);
  return 1.0 - kolmogorov_cdf(x);
}

double ks_two_sample_pvalue(double d, std::size_t n, std::size_t m) {
  const double ne = static_cast<double>(n) * static_cast<double>(m) /
                    static_cast<double>(n + m);
  return ks_pvalue(d, static_cast<std::size_t>(std::llround(ne)));
}

namespace {

double gamma_p_series(double a, double x) {
  double sum = 1.0 / a, term = sum;
  for (int k = 1; k < 500; ++k) {
    term *= x / (a + k);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi_square_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return 1.0 - gamma_p(0.5 * k, 0.5 * x);
}

ChiSquareResult chi_square_gof(std::span<const long long> observed,
                               std::span<const double> expected, int extra_constraints) {
  if (observed.size() != expected.size() || observed.empty()) {
    throw std::invalid_argument("chi_square_gof: size mismatch");
  }
  ChiSquareResult r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (!(expected[i] > 0.0)) throw std::invalid_argument("chi_square_gof: expected count <= 0");
    const double diff = static_cast<double>(observed[i]) - expected[i];
    r.statistic += diff * diff / expected[i];
  }
  r.dof = static_cast<int>(observed.size()) - extra_constraints;
  if (r.dof < 1) r.dof = 1;
  r.p_value = chi_square_sf(r.statistic, r.dof);
  return r;
}

ProportionCI wilson_interval(long long successes, long long n, double z) {
  if (n <= 0) throw std::invalid_argument("wilson_interval: n must be positive");
  const double p = static_cast<double>(successes) / static_cast<double>(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {p, std::max(0.0, center - half), std::min(1.0, center + half)};
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<double> kaplan_meier(std::vector<CensoredObs> data, std::span<const double> times) {
  std::sort(data.begin(), data.end(),
            [](const CensoredObs& a, const CensoredObs& b) { return a.time < b.time; });
  std::vector<double> out(times.size(), 1.0);
  std::vector<std::size_t> order(times.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  double surv = 1.0;
  std::size_t at_risk = data.size();
  std::size_t i = 0, ti = 0;
  while (i < data.size()) {
    const double t = data[i].time;
    std::size_t deaths = 0, leaving = 0;
    while (i < data.size() && data[i].time == t) {
      if (!data[i].censored) ++deaths;
      ++leaving;
      ++i;
    }
    while (ti < order.size() && times[order[ti]] < t) out[order[ti++]] = surv;
    if (deaths > 0 && at_risk > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
    }
    at_risk -= leaving;
  }
  while (ti < order.size()) out[order[ti++]] = surv;
  return out;
}

LogRankResult log_rank_test(std::vector<CensoredObs> a, std::vector<CensoredObs> b) {
  // Pooled distinct event times; hypergeometric expectation and variance of
  // group-a deaths at each.
  std::map<double, std::array<long long, 4>> ev;  // time -> {deaths_a, leave_a, deaths_b, leave_b}
  for (const auto& o : a) {
    auto& e = ev[o.time];
    if (!o.censored) ++e[0];
    ++e[1];
  }
  for (const auto& o : b) {
    auto& e = ev[o.time];
    if (!o.censored) ++e[2];
    ++e[3];
  }
  double obs_minus_exp = 0.0, var = 0.0;
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  for (const auto& [t, e] : ev) {
    const double d = static_cast<double>(e[0] + e[2]);
    const double n = na + nb;
    if (d > 0.0 && n > 1.0) {
      const double expect_a = d * na / n;
      obs_minus_exp += static_cast<double>(e[0]) - expect_a;
      var += d * (na / n) * (nb / n) * (n - d) / (n - 1.0);
    }
    na -= static_cast<double>(e[1]);
    nb -= static_cast<double>(e[3]);
  }
  LogRankResult r;
  if (var > 0.0) {
    r.statistic = obs_minus_exp * obs_minus_exp / var;
    r.p_value = chi_square_sf(r.statistic, 1.0);
  }
  return r;
}

CorrelationEstimate correlation(std::span<const double> x, std::span<const double> y, double z) {
  if (x.size() != y.size() || x.size() < 4) {
    throw std::invalid_argument("correlation: need matched samples of size >= 4");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  CorrelationEstimate e;
  e.n = x.size();
  e.value = sxy / std::sqrt(sxx * syy);
  const double zr = 0.5 * std::log((1.0 + e.value) / (1.0 - e.value));
  const double se = 1.0 / std::sqrt(n - 3.0);
  e.lo = std::tanh(zr - z * se);
  e.hi = std::tanh(zr + z * se);
  return e;
}

double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("covariance: need matched samples of size >= 2");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / (n - 1.0);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace rwis

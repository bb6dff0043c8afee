#pragma once

#include <functional>
#include <span>
#include <vector>

namespace rwis {

/// Two-sided one-sample Kolmogorov-Smirnov statistic against a CDF.
/// The sample is copied and sorted internally.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);

/// Two-sample Kolmogorov-Smirnov statistic.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Asymptotic Kolmogorov distribution: P(sqrt(n) D <= x).
double kolmogorov_cdf(double x);

/// p-value for the one-sample KS statistic d at sample size n.
double ks_pvalue(double d, std::size_t n);

/// p-value for the two-sample KS statistic with effective size n*m/(n+m).
double ks_two_sample_pvalue(double d, std::size_t n, std::size_t m);

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Upper tail probability of a chi-square with k degrees of freedom.
double chi_square_sf(double x, double k);

/// Pearson chi-square goodness of fit: observed counts vs expected counts
/// (same length, expected > 0). Returns (statistic, p-value).
struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  int dof = 0;
};
ChiSquareResult chi_square_gof(std::span<const long long> observed,
                               std::span<const double> expected, int extra_constraints = 1);

/// Wilson score interval for a binomial proportion.
struct ProportionCI {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 1.0;
};
ProportionCI wilson_interval(long long successes, long long n, double z = 2.5758293035489004);

double quantile(std::vector<double> values, double q);  // by-value: sorts its copy
double median(std::vector<double> values);

/// Right-censored observation: time and whether the event was observed
/// (censored == false) or the observation was cut at `time`.
struct CensoredObs {
  double time = 0.0;
  bool censored = false;
};

/// Kaplan-Meier survival estimate evaluated at the given times.
std::vector<double> kaplan_meier(std::vector<CensoredObs> data, std::span<const double> times);

/// Two-sample log-rank test for right-censored data. Returns (statistic ~
/// chi-square with 1 dof, p-value).
struct LogRankResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
LogRankResult log_rank_test(std::vector<CensoredObs> a, std::vector<CensoredObs> b);

/// Pearson correlation with a Fisher-z confidence interval.
struct CorrelationEstimate {
  double value = 0.0;
  double lo = -1.0;
  double hi = 1.0;
  std::size_t n = 0;
};
CorrelationEstimate correlation(std::span<const double> x, std::span<const double> y,
                                double z = 2.5758293035489004);

/// Sample covariance (unbiased) between x and y.
double covariance(std::span<const double> x, std::span<const double> y);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace rwis

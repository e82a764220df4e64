#pragma once

#include <vector>

namespace sdp {

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation,
// absolute accuracy around 1e-10 on the statistics ranges used here.
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);
// Two-sided upper quantile: smallest q with P(|T| <= q) = p for p in (0,1).
double student_t_quantile(double p, double df);

double f_distribution_sf(double f, double d1, double d2);  // upper tail

struct AggregateStats {
  double mean = 0.0;
  double stddev = 0.0;     // sample std, n-1 denominator
  double ci95_half = 0.0;  // t_{0.975, n-1} * std / sqrt(n)
  int n = 0;
};

AggregateStats aggregate_stats(const std::vector<double>& values);

// 1 - (std_sdp / std_base)^2
double var_drop(double std_sdp, double std_base);

struct TestResult {
  double stat = 0.0;
  double p = 1.0;
  bool degenerate = false;  // zero-variance path
};

// Levene statistic on absolute deviations from group medians; p from the F
// distribution with (k-1, N-k) degrees of freedom.
TestResult brown_forsythe(const std::vector<std::vector<double>>& groups);

// Two-sided paired t test on elementwise differences.
TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace sdp

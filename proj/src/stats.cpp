#include "sdp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sdp/common.hpp"

namespace sdp {

namespace {

// Lentz's continued fraction for the incomplete beta; classic form with the
// symmetry switch at x > (a+1)/(a+b+2).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw NumericalError("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (df <= 0.0) throw NumericalError("student_t_cdf: df must be > 0");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, x);
  return t > 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double df) {
  if (p <= 0.0 || p >= 1.0) throw NumericalError("student_t_quantile: p must be in (0,1)");
  if (p == 0.5) return 0.0;
  // Bisection on the CDF; the bracket grows until it straddles p.
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, df) > p) lo *= 2.0;
  while (student_t_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, df) < p)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-14 * std::max(1.0, std::abs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

double f_distribution_sf(double f, double d1, double d2) {
  if (d1 <= 0.0 || d2 <= 0.0)
    throw NumericalError("f_distribution_sf: degrees of freedom must be > 0");
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

AggregateStats aggregate_stats(const std::vector<double>& values) {
  const int n = static_cast<int>(values.size());
  if (n < 2) throw ConfigError("aggregate_stats: need at least 2 values");
  AggregateStats s;
  s.n = n;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(ss / (n - 1));
  s.ci95_half = student_t_quantile(0.975, n - 1) * s.stddev / std::sqrt(double(n));
  return s;
}

double var_drop(double std_sdp, double std_base) {
  if (std_base <= 0.0) throw ConfigError("var_drop: baseline std must be > 0");
  const double ratio = std_sdp / std_base;
  return 1.0 - ratio * ratio;
}

TestResult brown_forsythe(const std::vector<std::vector<double>>& groups) {
  const int k = static_cast<int>(groups.size());
  if (k < 2) throw ConfigError("brown_forsythe: need at least 2 groups");
  int n_total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw ConfigError("brown_forsythe: every group needs n >= 2");
    n_total += static_cast<int>(g.size());
  }
  if (n_total - k <= 0) throw ConfigError("brown_forsythe: degenerate degrees of freedom");

  // z_ij = |x_ij - median_j|, then a one-way ANOVA F statistic on z.
  std::vector<std::vector<double>> z(groups.size());
  double grand = 0.0;
  std::vector<double> group_mean(groups.size(), 0.0);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    const double med = median(groups[j]);
    z[j].reserve(groups[j].size());
    for (double v : groups[j]) {
      const double d = std::abs(v - med);
      z[j].push_back(d);
      group_mean[j] += d;
      grand += d;
    }
    group_mean[j] /= static_cast<double>(groups[j].size());
  }
  grand /= static_cast<double>(n_total);

  double between = 0.0, within = 0.0;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    between += static_cast<double>(groups[j].size()) *
               (group_mean[j] - grand) * (group_mean[j] - grand);
    for (double d : z[j]) within += (d - group_mean[j]) * (d - group_mean[j]);
  }

  TestResult res;
  if (within == 0.0) {
    if (between == 0.0) {
      res.stat = 0.0;
      res.p = 1.0;
      res.degenerate = true;
      return res;
    }
    res.stat = std::numeric_limits<double>::infinity();
    res.p = 0.0;
    res.degenerate = true;
    return res;
  }
  res.stat = (between / (k - 1)) / (within / (n_total - k));
  res.p = f_distribution_sf(res.stat, k - 1, n_total - k);
  return res;
}

TestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ConfigError("paired_t_test: length mismatch");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw ConfigError("paired_t_test: need n >= 2");
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)] - mean;
    ss += d * d;
  }
  TestResult res;
  if (ss == 0.0) {
    res.degenerate = true;
    if (mean == 0.0) {
      res.stat = 0.0;
      res.p = 1.0;
    } else {
      res.stat = mean > 0.0 ? std::numeric_limits<double>::infinity()
                            : -std::numeric_limits<double>::infinity();
      res.p = 0.0;
    }
    return res;
  }
  const double sd = std::sqrt(ss / (n - 1));
  res.stat = mean / (sd / std::sqrt(double(n)));
  res.p = 2.0 * (1.0 - student_t_cdf(std::abs(res.stat), n - 1));
  res.p = std::clamp(res.p, 0.0, 1.0);
  return res;
}

}  // namespace sdp

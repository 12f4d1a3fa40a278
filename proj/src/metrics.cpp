#include "ladder/metrics.hpp"

#include <cmath>

namespace ladder {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

namespace {

// Continued fraction for the incomplete beta (modified Lentz algorithm).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x < 0.0 || x > 1.0) throw ParameterError("incomplete_beta requires x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(log_front);
  // Use the symmetry relation to keep the continued fraction convergent.
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double nu) {
  if (nu <= 0) throw ParameterError("student_t_cdf requires nu > 0");
  if (t == 0.0) return 0.5;
  const double x = nu / (nu + t * t);
  const double tail = 0.5 * incomplete_beta(nu / 2.0, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

SignificanceResult fisher_z_test(double ccc_a, std::size_t n_a, double ccc_b, std::size_t n_b) {
  if (n_a <= 3 || n_b <= 3) throw ParameterError("fisher_z_test requires n > 3");
  if (std::fabs(ccc_a) >= 1.0 || std::fabs(ccc_b) >= 1.0)
    throw MetricError("fisher_z_test undefined at |ccc| = 1 (infinite transform)");
  const double za = std::atanh(ccc_a);
  const double zb = std::atanh(ccc_b);
  const double se =
      std::sqrt(1.0 / static_cast<double>(n_a - 3) + 1.0 / static_cast<double>(n_b - 3));
  SignificanceResult result;
  result.statistic = (za - zb) / se;
  result.p_value = 1.0 - normal_cdf(result.statistic);
  result.significant = result.p_value < kSignificanceLevel;
  return result;
}

SignificanceResult paired_t_test(const std::vector<double>& values_a,
                                 const std::vector<double>& values_b) {
  if (values_a.size() != values_b.size())
    throw DimensionError("paired_t_test requires equally long sequences");
  const std::size_t n = values_a.size();
  if (n < 2) throw ParameterError("paired_t_test requires at least two pairs");
  double mean_d = 0;
  for (std::size_t i = 0; i < n; ++i) mean_d += values_a[i] - values_b[i];
  mean_d /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = values_a[i] - values_b[i] - mean_d;
    ss += d * d;
  }
  const double var_d = ss / static_cast<double>(n - 1);
  if (var_d == 0.0)
    throw MetricError("paired_t_test degenerate: differences have zero variance");
  SignificanceResult result;
  result.statistic = mean_d / std::sqrt(var_d / static_cast<double>(n));
  result.p_value = 1.0 - student_t_cdf(result.statistic, static_cast<double>(n - 1));
  result.significant = result.p_value < kSignificanceLevel;
  return result;
}

}  // namespace ladder

#ifndef LADDER_METRICS_HPP_
#define LADDER_METRICS_HPP_

#include <cstddef>
#include <vector>

#include "ladder/tensor.hpp"

namespace ladder {

struct MetricValue {
  double ccc = 0;
  double pearson = 0;
  std::size_t n = 0;
};

struct SignificanceResult {
  double statistic = 0;
  double p_value = 1;
  bool significant = false;  // one-tailed, p < 0.05
};

inline constexpr double kSignificanceLevel = 0.05;

namespace detail {
struct CccMoments {
  double mean_x, mean_y, var_x, var_y, cov;  // biased (1/n) moments
  std::size_t n;
};

template <typename Real>
CccMoments ccc_moments(const Tensor<Real>& pred, const Tensor<Real>& truth) {
  pred.require_rank(1);
  truth.require_rank(1);
  if (pred.shape[0] != truth.shape[0])
    throw DimensionError("ccc requires equally long vectors");
  const std::size_t n = pred.shape[0];
  if (n < 2) throw MetricError("ccc requires at least two samples");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += pred(i);
    my += truth(i);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double vx = 0, vy = 0, cov = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pred(i) - mx;
    const double dy = truth(i) - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  vx /= static_cast<double>(n);
  vy /= static_cast<double>(n);
  cov /= static_cast<double>(n);
  if (vx == 0 && vy == 0) throw MetricError("ccc undefined: both vectors are constant");
  return {mx, my, vx, vy, cov, n};
}
}  // namespace detail

/// Concordance correlation coefficient with biased (1/n) moments:
/// 2*cov / (var_x + var_y + (mean_x - mean_y)^2).
template <typename Real>
double ccc(const Tensor<Real>& pred, const Tensor<Real>& truth) {
  auto m = detail::ccc_moments(pred, truth);
  const double mean_gap = m.mean_x - m.mean_y;
  return 2.0 * m.cov / (m.var_x + m.var_y + mean_gap * mean_gap);
}

template <typename Real>
double pearson(const Tensor<Real>& pred, const Tensor<Real>& truth) {
  auto m = detail::ccc_moments(pred, truth);
  if (m.var_x == 0 || m.var_y == 0)
    throw MetricError("pearson undefined: a vector is constant");
  return m.cov / std::sqrt(m.var_x * m.var_y);
}

template <typename Real>
MetricValue metric_value(const Tensor<Real>& pred, const Tensor<Real>& truth) {
  return {ccc(pred, truth), pearson(pred, truth), pred.shape[0]};
}

/// loss = 1 - ccc(pred, truth) together with d loss / d pred.
template <typename Real>
double ccc_loss_and_grad(const Tensor<Real>& pred, const Tensor<Real>& truth,
                         Tensor<Real>& grad_pred) {
  auto m = detail::ccc_moments(pred, truth);
  const std::size_t n = m.n;
  const double gap = m.mean_x - m.mean_y;
  const double denom = m.var_x + m.var_y + gap * gap;
  const double concordance = 2.0 * m.cov / denom;
  grad_pred = Tensor<Real>::zeros({n});
  const double scale = 2.0 / (static_cast<double>(n) * denom * denom);
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = pred(i) - m.mean_x;
    const double dy = truth(i) - m.mean_y;
    const double dccc = scale * (dy * denom - 2.0 * m.cov * (dx + gap));
    grad_pred(i) = static_cast<Real>(-dccc);
  }
  return 1.0 - concordance;
}

/// Standard normal CDF via erfc (absolute accuracy well below 1e-12).
double normal_cdf(double z);

/// Student t CDF with nu degrees of freedom, via the regularized
/// incomplete beta function.
double student_t_cdf(double t, double nu);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// One-tailed z-test on atanh-transformed coefficients with variances
/// 1/(n-3): tests whether system a beats system b.
SignificanceResult fisher_z_test(double ccc_a, std::size_t n_a, double ccc_b, std::size_t n_b);

/// One-tailed matched-pair t-test of a > b on per-fold values.
SignificanceResult paired_t_test(const std::vector<double>& values_a,
                                 const std::vector<double>& values_b);

}  // namespace ladder

#endif  // LADDER_METRICS_HPP_

#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "ladder/metrics.hpp"

using namespace ladder;

namespace {

// Independent long-double reference for the concordance formula.
long double ccc_reference(const Tensor<double>& x, const Tensor<double>& y) {
  const std::size_t n = x.shape[0];
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x(i);
    my += y(i);
  }
  mx /= n;
  my /= n;
  long double vx = 0, vy = 0, cov = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (x(i) - mx) * (y(i) - my);
    vx += (x(i) - mx) * (x(i) - mx);
    vy += (y(i) - my) * (y(i) - my);
  }
  cov /= n;
  vx /= n;
  vy /= n;
  return 2.0L * cov / (vx + vy + (mx - my) * (mx - my));
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("ccc: perfect concordance, anti-concordance, worked example") {
  auto y = Tensor<double>::vector({0.3, -1.2, 2.2, 0.9});
  CHECK(ccc(y, y) == doctest::Approx(1.0).epsilon(1e-15));

  auto zero_mean = Tensor<double>::vector({-1.0, 0.5, 0.5});
  auto negated = Tensor<double>::vector({1.0, -0.5, -0.5});
  CHECK(ccc(negated, zero_mean) == doctest::Approx(-1.0).epsilon(1e-15));

  auto pred = Tensor<double>::vector({2, 3, 4, 5});
  auto truth = Tensor<double>::vector({1, 2, 3, 4});
  CHECK(ccc(pred, truth) == doctest::Approx(5.0 / 7.0).epsilon(1e-15));
}

TEST_CASE("ccc matches the direct-formula reference on 1000 random pairs") {
  RngStream rng(101);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.next_below(40);
    auto x = sample_gaussian<double>({n}, 1.0 + rng.next_unit(), rng);
    auto y = sample_gaussian<double>({n}, 1.0 + rng.next_unit(), rng);
    for (std::size_t i = 0; i < n; ++i) y(i) += 0.5 * x(i);
    const double got = ccc(x, y);
    CHECK(std::fabs(got - static_cast<double>(ccc_reference(x, y))) < 1e-12);
    CHECK(got >= -1.0 - 1e-12);
    CHECK(got <= 1.0 + 1e-12);
    CHECK(std::fabs(got) <= std::fabs(pearson(x, y)) + 1e-12);
  }
}

TEST_CASE("ccc is invariant under a common positive affine map") {
  RngStream rng(103);
  auto x = sample_gaussian<double>({64}, 1.0, rng);
  auto y = sample_gaussian<double>({64}, 1.0, rng);
  const double base = ccc(x, y);
  auto xs = x, ys = y;
  for (std::size_t i = 0; i < 64; ++i) {
    xs(i) = 2.5 * x(i) + 3.0;
    ys(i) = 2.5 * y(i) + 3.0;
  }
  CHECK(ccc(xs, ys) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("ccc penalizes scale and shift against a fixed target") {
  RngStream rng(104);
  auto y = sample_gaussian<double>({32}, 1.0, rng);
  auto scaled = y;
  auto shifted = y;
  for (std::size_t i = 0; i < 32; ++i) {
    scaled(i) = 1.7 * y(i);
    shifted(i) = y(i) + 0.8;
  }
  CHECK(ccc(scaled, y) < 1.0);
  CHECK(ccc(shifted, y) < 1.0);
}

TEST_CASE("ccc error conditions") {
  auto constant = Tensor<double>::vector({2, 2, 2});
  CHECK_THROWS_AS(ccc(constant, constant), MetricError);
  auto one = Tensor<double>::vector({1});
  CHECK_THROWS_AS(ccc(one, one), MetricError);
  // a single constant vector is fine: concordance is zero
  auto varying = Tensor<double>::vector({1, 2, 3});
  CHECK(ccc(constant, varying) == doctest::Approx(0.0));
}

TEST_CASE("ccc loss gradient: zero at perfection, finite differences, affine chain") {
  auto y = Tensor<double>::vector({0.1, 0.7, -0.4, 1.3});
  Tensor<double> grad;
  CHECK(ccc_loss_and_grad(y, y, grad) == doctest::Approx(0.0).epsilon(1e-15));

  RngStream rng(107);
  auto pred = sample_gaussian<double>({32}, 1.0, rng);
  auto truth = sample_gaussian<double>({32}, 1.0, rng);
  Tensor<double> analytic;
  ccc_loss_and_grad(pred, truth, analytic);
  auto cost = [&]() {
    Tensor<double> unused;
    return ccc_loss_and_grad(pred, truth, unused);
  };
  CHECK(gradcheck::check_tensor(pred, analytic, cost, 1e-6) < 1e-6);

  // Same positive affine map on both series: gradient picks up the 1/a factor.
  const double a = 3.0, b = -1.25;
  auto pred2 = pred, truth2 = truth;
  for (std::size_t i = 0; i < 32; ++i) {
    pred2(i) = a * pred(i) + b;
    truth2(i) = a * truth(i) + b;
  }
  Tensor<double> analytic2;
  ccc_loss_and_grad(pred2, truth2, analytic2);
  for (std::size_t i = 0; i < 32; ++i)
    CHECK(analytic2(i) == doctest::Approx(analytic(i) / a).epsilon(1e-9));
}

TEST_CASE("normal cdf reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(normal_cdf(-1.959963984540054) == doctest::Approx(0.025).epsilon(1e-12));
}

TEST_CASE("student t cdf reference values") {
  CHECK(student_t_cdf(0.0, 7) == doctest::Approx(0.5).epsilon(1e-15));
  // classic one-tailed 5% critical values
  CHECK(student_t_cdf(2.015048372669157, 5) == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(student_t_cdf(1.812461122811676, 10) == doctest::Approx(0.95).epsilon(1e-9));
  CHECK(student_t_cdf(-2.015048372669157, 5) == doctest::Approx(0.05).epsilon(1e-9));
}

TEST_CASE("fisher z test: symmetry and published-value reproductions") {
  auto equal = fisher_z_test(0.5, 100, 0.5, 100);
  CHECK(equal.statistic == doctest::Approx(0.0));
  CHECK(equal.p_value == doctest::Approx(0.5));
  CHECK_FALSE(equal.significant);

  // test-set arousal comparison: 0.770 vs 0.743 with n = 7341 both ways
  auto arousal = fisher_z_test(0.770, 7341, 0.743, 7341);
  CHECK(arousal.statistic == doctest::Approx(3.8272).epsilon(1e-3));
  CHECK(arousal.significant);

  // test-set valence comparison in the direction a > b: not significant
  auto valence = fisher_z_test(0.303, 7341, 0.312, 7341);
  CHECK_FALSE(valence.significant);

  auto forward = fisher_z_test(0.6, 500, 0.4, 400);
  auto backward = fisher_z_test(0.4, 400, 0.6, 500);
  CHECK(forward.statistic == doctest::Approx(-backward.statistic).epsilon(1e-12));
}

TEST_CASE("fisher z test error conditions") {
  CHECK_THROWS_AS(fisher_z_test(1.0, 100, 0.5, 100), MetricError);
  CHECK_THROWS_AS(fisher_z_test(0.5, 3, 0.5, 100), ParameterError);
}

TEST_CASE("paired t test: degenerate, one-sided shift, antisymmetry") {
  std::vector<double> a{0.5, 0.6, 0.7, 0.8, 0.9};
  CHECK_THROWS_AS(paired_t_test(a, a), MetricError);

  std::vector<double> b = a;
  std::vector<double> shifted(a.size());
  const double jitter[] = {1e-3, -2e-3, 3e-3, -1e-3, 2e-3};
  for (std::size_t i = 0; i < a.size(); ++i) shifted[i] = a[i] + 0.1 + jitter[i];
  auto up = paired_t_test(shifted, b);
  CHECK(up.significant);
  CHECK(up.p_value < 0.05);

  auto down = paired_t_test(b, shifted);
  CHECK(down.statistic == doctest::Approx(-up.statistic).epsilon(1e-12));
  CHECK_FALSE(down.significant);
}

TEST_SUITE_END();

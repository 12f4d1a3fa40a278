#ifndef LADDER_TESTS_GRADCHECK_HPP_
#define LADDER_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "ladder/combinator.hpp"
#include "ladder/tensor.hpp"

namespace gradcheck {

// Central-difference oracle: every analytic gradient in this project is
// checked against (f(x+h) - f(x-h)) / 2h in 64-bit arithmetic. The cost
// callback must be deterministic (fixed rng seeds, frozen batch).

inline double relative_error(double analytic, double numeric) {
  // Below the central-difference noise floor both sides are numerically zero;
  // between the floor and 1e-4 the difference is measured against a 1e-4
  // yardstick (truncation error dominates relative accuracy down there).
  if (std::fabs(analytic) < 5e-7 && std::fabs(numeric) < 5e-7) return 0.0;
  return std::fabs(analytic - numeric) / std::max(std::fabs(analytic) + std::fabs(numeric), 1e-4);
}

/// Checks d cost / d param for one tensor; returns the max relative error.
inline double check_tensor(ladder::Tensor<double>& param, const ladder::Tensor<double>& analytic,
                           const std::function<double()>& cost, double h = 1e-5) {
  double worst = 0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double saved = param.data[i];
    param.data[i] = saved + h;
    const double up = cost();
    param.data[i] = saved - h;
    const double down = cost();
    param.data[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, relative_error(analytic.data[i], numeric));
  }
  return worst;
}

/// Checks every parameter of a model against its gradient twin.
inline double check_params(std::vector<ladder::ParamRef<double>> params,
                           std::vector<ladder::ParamRef<double>> grads,
                           const std::function<double()>& cost, double h = 1e-5) {
  double worst = 0;
  for (std::size_t k = 0; k < params.size(); ++k)
    worst = std::max(worst, check_tensor(*params[k].value, *grads[k].value, cost, h));
  return worst;
}

}  // namespace gradcheck

#endif  // LADDER_TESTS_GRADCHECK_HPP_

#pragma once

// Sample estimate of the shortfall risk: the root t of
//   (1/m) sum l(-x_i - t) = lambda.

#include <span>

#include "ubsr/loss.hpp"

namespace ubsr {

struct UbsrEstimate {
  double t = 0.0;
  double residual = 0.0;  // (1/m) sum l(-x_i - t) - lambda
  int iterations = 0;
};

// Throws NoSignChange when lambda <= 0 (the infimum of both losses),
// InvalidArgument for empty or non-finite samples.
UbsrEstimate estimate_ubsr(std::span<const double> samples, double lambda, const LossFunction& loss,
                           double tol = 1e-10);

// (1/m) sum l(-x_i - t) - lambda; +inf on exponential overflow.
double ubsr_residual(std::span<const double> samples, double lambda, const LossFunction& loss, double t);

}  // namespace ubsr

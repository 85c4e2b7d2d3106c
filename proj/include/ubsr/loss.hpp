#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "ubsr/errors.hpp"

namespace ubsr {

enum class LossKind { Exponential, PiecewisePolynomial };

// Convex, nondecreasing loss l with l(x) = 0 below its flat threshold.
// Exponential: l(x) = exp(beta x).  Polynomial: l(x) = max(x,0)^eta / eta.
//
// The *_unchecked members skip the overflow guard and return inf instead of
// throwing; kernels use them inside parallel regions and report afterwards.
class LossFunction {
 public:
  // Largest beta*x accepted before exp() is considered to overflow.
  static constexpr double kMaxExponent = 700.0;

  static LossFunction exponential(double beta);
  // kink_element picks the member of the second-derivative subdifferential
  // used at x = 0 when eta = 2 (any value in [0, 1]).
  static LossFunction piecewise_polynomial(double eta, double kink_element = 0.0);

  LossKind kind() const { return kind_; }
  double parameter() const { return param_; }
  double kink_element() const { return kink_; }

  // -inf for exponential, 0 for polynomial.
  double flat_threshold() const {
    return kind_ == LossKind::Exponential ? -std::numeric_limits<double>::infinity() : 0.0;
  }

  bool overflows(double x) const {
    return kind_ == LossKind::Exponential && param_ * x > kMaxExponent;
  }

  double value(double x) const { check(x); return value_unchecked(x); }
  double deriv(double x) const { check(x); return deriv_unchecked(x); }
  double second_deriv(double x) const { check(x); return second_unchecked(x); }
  double third_deriv(double x) const { check(x); return third_unchecked(x); }

  double value_unchecked(double x) const {
    if (kind_ == LossKind::Exponential) return std::exp(param_ * x);
    if (x <= 0.0) return 0.0;
    return pow_eta(x) / param_;
  }

  double deriv_unchecked(double x) const {
    if (kind_ == LossKind::Exponential) return param_ * std::exp(param_ * x);
    if (x <= 0.0) return 0.0;
    return pow_eta_minus(x, 1);
  }

  double second_unchecked(double x) const {
    if (kind_ == LossKind::Exponential) return param_ * param_ * std::exp(param_ * x);
    if (x < 0.0) return 0.0;
    if (x == 0.0) return eta2_ ? kink_ : 0.0;
    return (param_ - 1.0) * pow_eta_minus(x, 2);
  }

  double third_unchecked(double x) const {
    if (kind_ == LossKind::Exponential) return param_ * param_ * param_ * std::exp(param_ * x);
    if (x <= 0.0 || eta2_) return 0.0;
    return (param_ - 1.0) * (param_ - 2.0) * pow_eta_minus(x, 3);
  }

  // l, l' and l'' sharing one exp() evaluation.
  struct Derivs {
    double value;
    double d1;
    double d2;
  };

  Derivs derivs_unchecked(double x) const {
    if (kind_ == LossKind::Exponential) {
      const double e = std::exp(param_ * x);
      return {e, param_ * e, param_ * param_ * e};
    }
    if (x < 0.0) return {0.0, 0.0, 0.0};
    if (x == 0.0) return {0.0, 0.0, eta2_ ? kink_ : 0.0};
    if (eta2_) return {0.5 * x * x, x, 1.0};
    if (eta3_) return {x * x * x / 3.0, x * x, 2.0 * x};
    const double p2 = std::pow(x, param_ - 2.0);
    return {p2 * x * x / param_, p2 * x, (param_ - 1.0) * p2};
  }

  std::string describe() const;

 private:
  LossFunction(LossKind kind, double param, double kink);

  void check(double x) const {
    if (overflows(x)) {
      throw Error(ErrorCode::Overflow, "exponential loss overflow at x = " + std::to_string(x));
    }
  }

  double pow_eta(double x) const {
    if (eta2_) return x * x;
    if (eta3_) return x * x * x;
    return std::pow(x, param_);
  }

  double pow_eta_minus(double x, int k) const {
    const double p = param_ - k;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return x;
    if (p == 2.0) return x * x;
    return std::pow(x, p);
  }

  LossKind kind_;
  double param_;
  double kink_;
  bool eta2_;
  bool eta3_;
};

}  // namespace ubsr

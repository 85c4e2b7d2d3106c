// Exponential loss has a log-sum-exp closed form; the polynomial loss goes
// through a bracketed Newton iteration that falls back to bisection.

#include "ubsr/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ubsr/kernels.hpp"

namespace ubsr {

namespace {

struct Eval {
  double f;
  double slope;  // df/dt = -(1/m) sum l'(-x_i - t)
};

Eval eval(std::span<const double> x, double lambda, const LossFunction& loss, double t) {
  kernels::CompensatedSum v, d;
  for (double xi : x) {
    const double z = -xi - t;
    if (loss.overflows(z)) return {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    const auto dv = loss.derivs_unchecked(z);
    v.add(dv.value);
    d.add(dv.d1);
  }
  const double m = static_cast<double>(x.size());
  return {v.value() / m - lambda, -d.value() / m};
}

}  // namespace

double ubsr_residual(std::span<const double> samples, double lambda, const LossFunction& loss, double t) {
  return eval(samples, lambda, loss, t).f;
}

UbsrEstimate estimate_ubsr(std::span<const double> x, double lambda, const LossFunction& loss, double tol) {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "estimate needs at least one sample");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "samples must be finite");
  }
  if (!std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be finite");
  if (!(lambda > 0.0)) throw Error(ErrorCode::NoSignChange, "lambda must exceed inf l = 0");

  UbsrEstimate out;
  const double m = static_cast<double>(x.size());

  if (loss.kind() == LossKind::Exponential) {
    // t = (1/beta) log mean exp(-beta x) - log(lambda)/beta
    const double beta = loss.parameter();
    double top = -std::numeric_limits<double>::infinity();
    for (double v : x) top = std::max(top, -beta * v);
    kernels::CompensatedSum s;
    for (double v : x) s.add(std::exp(-beta * v - top));
    out.t = (top + std::log(s.value() / m) - std::log(lambda)) / beta;
    out.iterations = 1;
    out.residual = eval(x, lambda, loss, out.t).f;
    return out;
  }

  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  double K = 1.0;
  double lo = *xmin - K;
  double hi = *xmax + K;
  Eval flo = eval(x, lambda, loss, lo);
  Eval fhi = eval(x, lambda, loss, hi);
  for (int k = 0; !(flo.f > 0.0 && fhi.f < 0.0); ++k) {
    if (k == 2000 || !std::isfinite(K)) throw Error(ErrorCode::NoSignChange, "no sign change in the estimator bracket");
    K *= 2.0;
    lo = *xmin - K;
    hi = *xmax + K;
    flo = eval(x, lambda, loss, lo);
    fhi = eval(x, lambda, loss, hi);
  }

  // f is convex and nonincreasing, so Newton from the left end never overshoots.
  double t = lo;
  Eval ft = flo;
  const double eps = std::numeric_limits<double>::epsilon();
  for (int k = 1; k <= 1000; ++k) {
    out.iterations = k;
    double next = ft.slope < 0.0 ? t - ft.f / ft.slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = next - t;
    t = next;
    ft = eval(x, lambda, loss, t);
    if (ft.f == 0.0) break;
    if (ft.f > 0.0) lo = t; else hi = t;
    if (std::abs(ft.f) <= tol && std::abs(step) <= 4.0 * eps * std::max(1.0, std::abs(t))) break;
    if (hi - lo <= 4.0 * eps * std::max(1.0, std::max(std::abs(lo), std::abs(hi)))) break;
  }
  out.t = t;
  out.residual = ft.f;
  if (!(std::abs(out.residual) <= tol)) throw Error(ErrorCode::MaxIterations, "estimator did not reach the tolerance");
  return out;
}

}  // namespace ubsr

#include "ubsr/loss.hpp"

#include <sstream>

namespace ubsr {

LossFunction::LossFunction(LossKind kind, double param, double kink)
    : kind_(kind),
      param_(param),
      kink_(kink),
      eta2_(kind == LossKind::PiecewisePolynomial && param == 2.0),
      eta3_(kind == LossKind::PiecewisePolynomial && param == 3.0) {}

LossFunction LossFunction::exponential(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorCode::InvalidArgument, "exponential loss needs beta > 0");
  }
  return LossFunction(LossKind::Exponential, beta, 0.0);
}

LossFunction LossFunction::piecewise_polynomial(double eta, double kink_element) {
  if (!(eta >= 2.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::InvalidArgument, "polynomial loss needs eta >= 2");
  }
  if (!(kink_element >= 0.0 && kink_element <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "kink element must lie in [0, 1]");
  }
  return LossFunction(LossKind::PiecewisePolynomial, eta, kink_element);
}

std::string LossFunction::describe() const {
  std::ostringstream os;
  if (kind_ == LossKind::Exponential) {
    os << "exp(beta=" << param_ << ")";
  } else {
    os << "poly(eta=" << param_ << ")";
  }
  return os.str();
}

}  // namespace ubsr

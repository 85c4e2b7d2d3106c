#include <cmath>
#include <limits>

#include "projection_internal.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

void ProjectionInstance::validate() const {
  if (x.empty()) throw Error(ErrorCode::InvalidArgument, "projection input x is empty");
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "projection input x has non-finite entries");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  }
}

const char* to_string(ProjectionSolver solver) {
  switch (solver) {
    case ProjectionSolver::DirSSN: return "dirssn";
    case ProjectionSolver::SepSSN: return "sepssn";
    case ProjectionSolver::Bisection: return "bisection";
    case ProjectionSolver::IPM: return "ipm";
  }
  return "unknown";
}

ProjectionSolver projection_solver_from_string(const std::string& name) {
  if (name == "dirssn") return ProjectionSolver::DirSSN;
  if (name == "sepssn") return ProjectionSolver::SepSSN;
  if (name == "bisection" || name == "bisect") return ProjectionSolver::Bisection;
  if (name == "ipm") return ProjectionSolver::IPM;
  throw Error(ErrorCode::InvalidArgument, "unknown projection solver '" + name + "'");
}

double KktCertificate::max() const {
  return std::max(std::max(stationarity, feasibility), std::max(complementarity, dual_sign));
}

KktCertificate kkt_certificate(const ProjectionInstance& inst, std::span<const double> u, double rho) {
  const std::size_t m = inst.x.size();
  const double c = rho / static_cast<double>(m);
  const auto& loss = inst.loss;
  const auto& x = inst.x;
  const std::size_t nb = kernels::block_count(m);
  std::vector<double> parts(nb, 0.0);
  kernels::run_blocks(kernels::default_backend(), nb, [&](std::size_t blk) {
    const std::size_t lo = blk * kernels::kBlockSize;
    const std::size_t hi = std::min(m, lo + kernels::kBlockSize);
    double w = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double d1 = loss.overflows(u[i]) ? std::numeric_limits<double>::infinity()
                                             : loss.deriv_unchecked(u[i]);
      w = std::max(w, std::abs(u[i] - x[i] + c * d1));
    }
    parts[blk] = w;
  });
  double worst = 0.0;
  for (double p : parts) worst = std::max(worst, p);
  const double gap = kernels::sum_loss_or_inf(loss, u) / static_cast<double>(m) - inst.lambda;
  KktCertificate cert;
  cert.stationarity = worst;
  cert.feasibility = std::max(gap, 0.0);
  cert.complementarity = rho == 0.0 ? 0.0 : std::abs(rho * gap);
  cert.dual_sign = std::max(-rho, 0.0);
  return cert;
}

double membership_margin(const ProjectionInstance& inst) {
  const double total = kernels::sum_loss_or_inf(inst.loss, inst.x);
  if (std::isinf(total)) return -std::numeric_limits<double>::infinity();
  return inst.lambda - total / static_cast<double>(inst.x.size());
}

namespace detail {

bool interior_result(const ProjectionInstance& inst, ProjectionSolver solver, ProjectionResult& out) {
  if (membership_margin(inst) < -kMembershipSlack) return false;
  out.u = inst.x;
  out.rho = 0.0;
  out.interior = true;
  out.solver = solver;
  out.kkt_residual = kkt_certificate(inst, out.u, 0.0).max();
  return true;
}

void finish(const ProjectionInstance& inst, ProjectionResult& out) {
  out.kkt_residual = kkt_certificate(inst, out.u, out.rho).max();
}

}  // namespace detail

ProjectionResult project(const ProjectionInstance& inst, ProjectionSolver solver, const ProjectionOptions& opt) {
  switch (solver) {
    case ProjectionSolver::DirSSN: return project_dirssn(inst, opt.dirssn);
    case ProjectionSolver::SepSSN: return project_sepssn(inst, opt.sepssn);
    case ProjectionSolver::Bisection: return project_bisection(inst, opt.bisection);
    case ProjectionSolver::IPM: return project_ipm(inst, opt.ipm);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown projection solver");
}

ProjectionResult project_quadratic_closed_form(const ProjectionInstance& inst) {
  inst.validate();
  if (inst.loss.kind() != LossKind::PiecewisePolynomial || inst.loss.parameter() != 2.0) {
    throw Error(ErrorCode::InvalidArgument, "closed form needs the eta = 2 loss");
  }
  ProjectionResult out;
  out.solver = ProjectionSolver::SepSSN;
  if (detail::interior_result(inst, out.solver, out)) return out;
  const double m = static_cast<double>(inst.x.size());
  double s = 0.0;
  for (double v : inst.x) {
    if (v > 0.0) s += v * v;
  }
  const double shrink = std::sqrt(2.0 * m * inst.lambda / s);
  out.rho = m * (1.0 / shrink - 1.0);
  out.u = inst.x;
  for (double& v : out.u) {
    if (v > 0.0) v *= shrink;
  }
  detail::finish(inst, out);
  return out;
}

}  // namespace ubsr

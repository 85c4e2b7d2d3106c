// Bisection on the decreasing map H(rho). The upper end is doubled until H <= 0,
// then halved down to the requested width. The returned point is the feasible
// upper end of the final bracket.

#include <algorithm>
#include <cmath>

#include "projection_internal.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

ProjectionResult project_bisection(const ProjectionInstance& inst, const BisectionOptions& opt) {
  inst.validate();
  ProjectionResult out;
  out.solver = ProjectionSolver::Bisection;
  if (detail::interior_result(inst, out.solver, out)) return out;
  if (!(opt.rho_upper0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "bisection needs rho_upper0 > 0");

  const std::size_t n = inst.x.size();
  const double m = static_cast<double>(n);
  const double target = m * inst.lambda;
  std::vector<double> u = inst.x;

  auto eval_h = [&](double rho) {
    const auto st = kernels::solve_g(inst.loss, inst.x, rho / m, u, opt.inner_tol, 200);
    out.iterations.inner += st.max_iterations;
    if (!st.converged) throw Error(ErrorCode::MaxIterations, "bisection coordinate solve did not converge");
    return kernels::sum_loss(inst.loss, u) - target;
  };

  double lo = 0.0;
  double hi = opt.rho_upper0;
  double H = eval_h(hi);
  int doublings = 0;
  while (H > 0.0) {
    if (++doublings > opt.max_doublings) {
      throw Error(ErrorCode::NoSignChange, "bisection could not find rho with H(rho) <= 0");
    }
    lo = hi;
    hi *= 2.0;
    H = eval_h(hi);
  }
  out.trace.push_back({std::abs(H), hi, 0.0, true});
  std::vector<double> u_hi = u;

  int it = 0;
  while (H != 0.0 && hi - lo > opt.tol) {
    if (++it > opt.max_iter) throw Error(ErrorCode::MaxIterations, "bisection reached the iteration limit");
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double Hm = eval_h(mid);
    out.trace.push_back({std::abs(Hm), mid, 0.5 * (hi - lo), true});
    if (Hm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      H = Hm;
      u_hi = u;
    }
  }
  out.iterations.outer = doublings + it;
  out.u = std::move(u_hi);
  out.rho = hi;
  detail::finish(inst, out);
  return out;
}

}  // namespace ubsr

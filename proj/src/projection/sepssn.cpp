// Newton on the scalar complementarity map H(rho) = sum l(u(rho)) - m lambda,
// where u(rho) solves the separable system u - x + (rho/m) l'(u) = 0.
// H is decreasing in rho, so a sign-change bracket guards every Newton step.

#include <cmath>
#include <limits>

#include "projection_internal.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

namespace {

double h_noise_floor(const ProjectionInstance& inst, std::span<const double> u, double loss_sum, double inner_tol) {
  const double eps = std::numeric_limits<double>::epsilon();
  const auto r = kernels::reduce<1>(kernels::default_backend(), u.size(), [&](std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      acc += inst.loss.deriv_unchecked(u[i]) * std::max(inner_tol, 4.0 * eps * std::abs(inst.x[i]));
    }
    return std::array<double, 1>{acc};
  });
  return r[0] + 4.0 * eps * loss_sum;
}

}  // namespace

ProjectionResult project_sepssn(const ProjectionInstance& inst, const SepSsnOptions& opt,
                                std::span<const double> warm_start) {
  inst.validate();
  ProjectionResult out;
  out.solver = ProjectionSolver::SepSSN;
  if (detail::interior_result(inst, out.solver, out)) return out;
  if (!(opt.rho0 > 0.0)) throw Error(ErrorCode::NonpositiveRho, "SepSSN needs rho0 > 0");

  const std::size_t n = inst.x.size();
  const double m = static_cast<double>(n);
  const double target = m * inst.lambda;
  if (warm_start.size() == n) {
    out.u.assign(warm_start.begin(), warm_start.end());
  } else {
    out.u = inst.x;
  }

  double rho = opt.rho0;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double last_step = 0.0;
  bool last_fallback = false;

  for (int k = 0; k <= opt.max_iter; ++k) {
    const auto st = kernels::solve_g(inst.loss, inst.x, rho / m, out.u, opt.inner_tol, opt.inner_max_iter);
    out.iterations.inner += st.max_iterations;
    if (!st.converged) {
      throw Error(ErrorCode::MaxIterations, "SepSSN coordinate solve did not converge");
    }
    const auto ht = kernels::h_terms(inst.loss, out.u, rho);
    const double H = ht.loss_sum - target;
    out.trace.push_back({std::abs(H), rho, last_step, last_fallback});
    out.iterations.outer = k;

    if (std::abs(H / m) * std::max(1.0, rho) <= opt.tol) break;
    // H cannot be resolved below the rounding of the coordinate solves
    if (std::abs(H) <= 1e-6 * target && std::abs(H) <= h_noise_floor(inst, out.u, ht.loss_sum, opt.inner_tol)) break;
    if (H > 0.0) {
      lo = rho;
    } else {
      hi = rho;
    }
    if (std::isfinite(hi) && hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) break;
    if (k == opt.max_iter) {
      throw Error(ErrorCode::MaxIterations, "SepSSN reached the iteration limit");
    }
    if (ht.deriv_sum == 0.0) {
      throw Error(ErrorCode::DegenerateDerivative, "all l'(u_i) vanish, H has no slope");
    }

    double next = rho + H / ht.slope_sum;  // rho - H / h with h = -slope_sum
    last_fallback = !(next > lo && next < hi);
    if (last_fallback) next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * std::max(rho, lo);
    last_step = next - rho;
    if (std::abs(last_step) <= 4.0 * std::numeric_limits<double>::epsilon() * rho) break;
    rho = next;
  }
  if (!(rho > 0.0)) throw Error(ErrorCode::NonpositiveRho, "SepSSN produced rho <= 0");
  out.rho = rho;
  detail::finish(inst, out);
  return out;
}

}  // namespace ubsr

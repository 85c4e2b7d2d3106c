// Primal-dual interior point method for
//   min 1/2 ||u - x||^2  s.t.  sum l(u) <= m lambda,
// with multiplier y on the constraint (rho = m y) and slack s = m lambda - sum l(u).
// The perturbed system is F_t = [ u - x + y l'(u) ; y s - 1/t ], t = mu / (y s).

#include <cmath>
#include <limits>

#include "projection_internal.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

namespace {

struct IpmPoint {
  double fu2;     // ||u - x + y l'(u)||^2
  double fu_inf;
  double slack;   // m lambda - sum l(u); -inf on overflow
};

IpmPoint evaluate(const ProjectionInstance& inst, std::span<const double> u, std::span<const double> du,
                  double a, double y) {
  const std::size_t n = inst.x.size();
  const auto& loss = inst.loss;
  const auto& x = inst.x;
  const bool shift = !du.empty() && a != 0.0;
  const std::size_t nb = kernels::block_count(n);
  std::vector<std::array<double, 2>> sums(nb);
  std::vector<double> maxima(nb, 0.0);
  kernels::run_blocks(kernels::default_backend(), nb, [&](std::size_t blk) {
    const std::size_t lo = blk * kernels::kBlockSize;
    const std::size_t hi = std::min(n, lo + kernels::kBlockSize);
    kernels::CompensatedSum lsum;
    double f2 = 0.0;
    double finf = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double ui = shift ? u[i] + a * du[i] : u[i];
      if (loss.overflows(ui)) {
        const double inf = std::numeric_limits<double>::infinity();
        sums[blk] = {inf, inf};
        maxima[blk] = inf;
        return;
      }
      const auto d = loss.derivs_unchecked(ui);
      const double f = ui - x[i] + y * d.d1;
      f2 += f * f;
      finf = std::max(finf, std::abs(f));
      lsum.add(d.value);
    }
    sums[blk] = {f2, lsum.value()};
    maxima[blk] = finf;
  });
  const auto r = kernels::pairwise_combine<2>(sums);
  double finf = 0.0;
  for (double v : maxima) finf = std::max(finf, v);
  const double m = static_cast<double>(n);
  return {r[0], finf, m * inst.lambda - r[1]};
}

// Strictly feasible start on the stationarity manifold: u0 solves
// u - x + y0 l'(u) = 0, with y0 doubled until sum l(u0) <= m lambda (1 - 1e-3).
std::vector<double> start_point(const ProjectionInstance& inst, double& y0) {
  std::vector<double> u = inst.x;
  const double m = static_cast<double>(u.size());
  const double target = m * inst.lambda * (1.0 - 1e-3);
  for (int k = 0; k < 200; ++k) {
    const auto st = kernels::solve_g(inst.loss, inst.x, y0, u, 1e-13, 200);
    if (st.converged && kernels::sum_loss_or_inf(inst.loss, u) <= target) return u;
    y0 *= 2.0;
  }
  throw Error(ErrorCode::InfeasibleStart, "IPM could not find a strictly feasible start");
}

}  // namespace

ProjectionResult project_ipm(const ProjectionInstance& inst, const IpmOptions& opt) {
  inst.validate();
  ProjectionResult out;
  out.solver = ProjectionSolver::IPM;
  if (detail::interior_result(inst, out.solver, out)) return out;
  out.surrogate_hessian =
      inst.loss.kind() == LossKind::PiecewisePolynomial && inst.loss.parameter() == 2.0;

  const std::size_t n = inst.x.size();
  const double m = static_cast<double>(n);
  const double mu = opt.mu > 0.0 ? opt.mu : (m >= 1e4 ? 50.0 : 10.0);
  const auto& loss = inst.loss;
  const auto& x = inst.x;

  double y = opt.y0;
  std::vector<double> u = start_point(inst, y);
  std::vector<double> fu(n), g(n), dinv(n), du(n);
  IpmPoint pt = evaluate(inst, u, {}, 0.0, y);
  if (!(pt.slack > 0.0)) throw Error(ErrorCode::InfeasibleStart, "IPM start is not strictly feasible");

  for (int k = 0;; ++k) {
    const double gap = y * pt.slack;  // equals rho (lambda - mean l(u))
    const double inv_t = gap / mu;
    const double fy = gap - inv_t;
    const double norm = std::sqrt(pt.fu2 + fy * fy);
    out.trace.push_back({norm, m * y, 0.0, false});
    out.iterations.outer = k;
    // slack is checked too: with a small multiplier a tiny gap still leaves u short of the boundary
    if (pt.fu_inf <= opt.tol && gap <= opt.tol && pt.slack <= opt.tol) break;
    if (k == opt.max_iter) throw Error(ErrorCode::MaxIterations, "IPM reached the iteration limit");

    const auto q = kernels::reduce<2>(kernels::default_backend(), n, [&](std::size_t b, std::size_t e) {
      double q1 = 0.0;
      double q2 = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const auto d = loss.derivs_unchecked(u[i]);
        fu[i] = u[i] - x[i] + y * d.d1;
        g[i] = d.d1;
        dinv[i] = 1.0 / (1.0 + y * d.d2);
        q1 += g[i] * dinv[i] * fu[i];
        q2 += g[i] * g[i] * dinv[i];
      }
      return std::array<double, 2>{q1, q2};
    });
    // Reduced system: (y g^T D^-1 g + s) dy = -F_y - y g^T D^-1 F_u.
    const double denom = y * q[1] + pt.slack;
    if (!(denom > 0.0)) throw Error(ErrorCode::SingularJacobian, "IPM reduced system is singular");
    const double dy = (-fy - y * q[0]) / denom;
    kernels::for_each_block(kernels::default_backend(), n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) du[i] = -dinv[i] * (fu[i] + dy * g[i]);
    });

    double alpha = 1.0;
    int bt = 0;
    IpmPoint trial = evaluate(inst, u, du, alpha, y + alpha * dy);
    while (!(y + alpha * dy > 0.0 && trial.slack > 0.0)) {
      if (++bt > opt.max_backtracks) throw Error(ErrorCode::Stall, "IPM could not stay interior");
      alpha *= opt.gamma;
      trial = evaluate(inst, u, du, alpha, y + alpha * dy);
    }
    auto merit = [&](const IpmPoint& p, double yy) {
      const double r = yy * p.slack - inv_t;
      return std::sqrt(p.fu2 + r * r);
    };
    while (!(merit(trial, y + alpha * dy) <= (1.0 - opt.nu * alpha) * norm)) {
      if (++bt > opt.max_backtracks) throw Error(ErrorCode::Stall, "IPM line search stalled");
      alpha *= opt.gamma;
      trial = evaluate(inst, u, du, alpha, y + alpha * dy);
    }
    out.iterations.backtracks += bt;
    bool moved = y + alpha * dy != y;
    for (std::size_t i = 0; i < n; ++i) {
      const double next = u[i] + alpha * du[i];
      moved = moved || next != u[i];
      u[i] = next;
    }
    if (!moved) throw Error(ErrorCode::Stall, "IPM step no longer changes the iterate");
    y += alpha * dy;
    out.trace.back().step = alpha;
    pt = trial;
  }
  out.u = std::move(u);
  out.rho = m * y;
  detail::finish(inst, out);
  return out;
}

}  // namespace ubsr

// Semismooth Newton on the full KKT system
//   F(u, rho) = [ u - x + (rho/m) grad L(u) ;  mean l(u) - lambda ] = 0.
// The Jacobian is diagonal plus a rank-two border, so each direction costs O(m)
// via the Schur complement on rho.

#include <algorithm>
#include <cmath>
#include <limits>

#include "projection_internal.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

namespace {

struct Residual {
  double norm2;     // ||F||_2^2
  double inf_norm;  // ||F1||_inf
  double gap;       // F2 = mean l(u) - lambda
};

// ||F||^2 at (u + a d1, rho + a d2); +inf when an exp term overflows.
Residual residual_at(const ProjectionInstance& inst, std::span<const double> u, std::span<const double> d1,
                     double a, double rho) {
  const std::size_t n = inst.x.size();
  const double m = static_cast<double>(n);
  const double c = rho / m;
  const auto& loss = inst.loss;
  const auto& x = inst.x;
  const bool shift = !d1.empty() && a != 0.0;
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
      const double ui = shift ? u[i] + a * d1[i] : u[i];
      if (loss.overflows(ui)) {
        const double inf = std::numeric_limits<double>::infinity();
        sums[blk] = {inf, inf};
        maxima[blk] = inf;
        return;
      }
      const auto d = loss.derivs_unchecked(ui);
      const double f = ui - x[i] + c * d.d1;
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
  const double gap = r[1] / m - inst.lambda;
  return {r[0] + gap * gap, finf, gap};
}

}  // namespace

ProjectionResult project_dirssn(const ProjectionInstance& inst, const DirSsnOptions& opt) {
  inst.validate();
  ProjectionResult out;
  out.solver = ProjectionSolver::DirSSN;
  if (detail::interior_result(inst, out.solver, out)) return out;
  if (!(opt.rho0 >= 0.0)) throw Error(ErrorCode::NonpositiveRho, "DirSSN needs rho0 > 0");

  const std::size_t n = inst.x.size();
  const double m = static_cast<double>(n);
  const auto& loss = inst.loss;
  const auto& x = inst.x;
  const double a_flat = loss.flat_threshold();

  std::vector<double> u = x;
  if (!opt.u0.empty()) {
    if (opt.u0.size() != n) throw Error(ErrorCode::InvalidArgument, "DirSSN u0 has the wrong length");
    u = opt.u0;
    if (std::isfinite(a_flat) && *std::max_element(u.begin(), u.end()) <= a_flat) {
      throw Error(ErrorCode::InvalidArgument, "DirSSN u0 lies entirely in the flat region");
    }
  }
  double rho = opt.rho0 > 0.0 ? opt.rho0 : static_cast<double>(inst.x.size());
  const double eps = std::numeric_limits<double>::epsilon();
  std::vector<double> f1(n), g(n), dinv(n), d1(n);
  Residual res = residual_at(inst, u, {}, 0.0, rho);
  if (!std::isfinite(res.norm2)) throw Error(ErrorCode::Overflow, "DirSSN start point overflows the loss");

  for (int k = 0;; ++k) {
    out.trace.push_back({std::sqrt(res.norm2), rho, 0.0, false});
    out.iterations.outer = k;
    // the gap can't go below a few ulps of lambda; rho ~ 1e7 at large m would
    // otherwise demand |gap| ~ 1e-17 and spin forever
    const double gap_floor = 4.0 * eps * (inst.lambda + std::abs(res.gap));
    const double gap_tol = std::max(opt.tol / std::max(1.0, rho), gap_floor);
    if (res.inf_norm <= opt.tol && std::abs(res.gap) <= gap_tol) break;
    if (k == opt.max_iter) throw Error(ErrorCode::MaxIterations, "DirSSN reached the iteration limit");

    // Jacobian pieces: D = I + (rho/m) diag(l''), border g = l'(u).
    const double c = rho / m;
    const auto q = kernels::reduce<2>(kernels::default_backend(), n, [&](std::size_t b, std::size_t e) {
      double q1 = 0.0;
      double q2 = 0.0;
      for (std::size_t i = b; i < e; ++i) {
        const auto d = loss.derivs_unchecked(u[i]);
        f1[i] = u[i] - x[i] + c * d.d1;
        g[i] = d.d1;
        dinv[i] = 1.0 / (1.0 + c * d.d2);
        q1 += g[i] * dinv[i] * f1[i];
        q2 += g[i] * g[i] * dinv[i];
      }
      return std::array<double, 2>{q1, q2};
    });
    if (!(q[1] > 0.0)) throw Error(ErrorCode::SingularJacobian, "DirSSN Schur complement vanished");
    const double dr = m * (m * res.gap - q[0]) / q[1];
    kernels::for_each_block(kernels::default_backend(), n, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) d1[i] = -dinv[i] * (f1[i] + dr * g[i] / m);
    });

    // Phase 1 keeps u out of the flat region and rho positive; phase 2 is Armijo on ||F||.
    double alpha = 1.0;
    int bt = 0;
    auto admissible = [&](double a) {
      if (!(rho + a * dr > 0.0)) return false;
      if (!std::isfinite(a_flat)) return true;
      bool any = false;
      for (std::size_t i = 0; i < n && !any; ++i) any = u[i] + a * d1[i] > a_flat;
      return any;
    };
    while (!admissible(alpha)) {
      if (++bt > opt.max_backtracks) throw Error(ErrorCode::Stall, "DirSSN line search stalled in phase 1");
      alpha *= opt.beta;
    }
    const double base = std::sqrt(res.norm2);
    Residual trial = residual_at(inst, u, d1, alpha, rho + alpha * dr);
    while (!(std::sqrt(trial.norm2) <= (1.0 - opt.sigma * alpha) * base)) {
      if (++bt > opt.max_backtracks) throw Error(ErrorCode::Stall, "DirSSN line search stalled");
      alpha *= opt.beta;
      trial = residual_at(inst, u, d1, alpha, rho + alpha * dr);
    }
    out.iterations.backtracks += bt;
    for (std::size_t i = 0; i < n; ++i) u[i] += alpha * d1[i];
    rho += alpha * dr;
    out.trace.back().step = alpha;
    res = trial;
  }
  out.u = std::move(u);
  out.rho = rho;
  detail::finish(inst, out);
  return out;
}

}  // namespace ubsr

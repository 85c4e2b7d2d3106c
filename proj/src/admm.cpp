#include "ubsr/admm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "ubsr/kernels.hpp"

namespace ubsr {

namespace {

using Clock = std::chrono::steady_clock;

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

double simplex_violation(const Eigen::VectorXd& w) {
  double v = std::abs(w.sum() - 1.0);
  for (Eigen::Index i = 0; i < w.size(); ++i) v = std::max(v, std::max(-w[i], 0.0));
  return v;
}

// [mean l(-(R w) - shift) - lambda]_+, inf on overflow.
double shortfall_violation(const Eigen::VectorXd& Rw, double shift, double lambda, const LossFunction& loss) {
  std::vector<double> arg(static_cast<std::size_t>(Rw.size()));
  for (std::size_t i = 0; i < arg.size(); ++i) arg[i] = -Rw[static_cast<Eigen::Index>(i)] - shift;
  const double mean = kernels::sum_loss_or_inf(loss, arg) / static_cast<double>(arg.size());
  return std::max(mean - lambda, 0.0);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd project_z(const Eigen::VectorXd& c1, const Eigen::VectorXd& warm, double lambda,
                          const LossFunction& loss, ProjectionSolver solver, const ProjectionOptions& popt,
                          ProjectionResult& pr) {
  ProjectionInstance inst{to_std(c1), lambda, loss};
  if (solver == ProjectionSolver::SepSSN) {
    const std::vector<double> ws = warm.size() == c1.size() ? to_std(warm) : std::vector<double>{};
    // the warm start must sit left of x coordinatewise to be useful; clamp it
    std::vector<double> seed = ws;
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] = std::min(seed[i], inst.x[i]);
    pr = project_sepssn(inst, popt.sepssn, seed);
  } else {
    pr = project(inst, solver, popt);
  }
  return Eigen::Map<const Eigen::VectorXd>(pr.u.data(), static_cast<Eigen::Index>(pr.u.size()));
}

}  // namespace

double equal_weight_return(const Eigen::VectorXd& mu) { return mu.size() == 0 ? 0.0 : mu.mean(); }

SaaProblem SaaProblem::make(Eigen::MatrixXd R, double lambda, double alpha, const LossFunction& loss,
                            std::optional<double> R0) {
  SaaProblem p;
  p.R = std::move(R);
  if (p.R.rows() == 0 || p.R.cols() == 0) throw Error(ErrorCode::InvalidArgument, "return matrix is empty");
  p.mu = p.R.colwise().mean().transpose();
  p.lambda = lambda;
  p.alpha = alpha;
  p.loss = loss;
  p.R0 = R0 ? *R0 : equal_weight_return(p.mu);
  p.validate();
  if (equal_weight_return(p.mu) < p.R0) {
    p.warnings.push_back("equal-weight return is below R0; feasibility is not guaranteed");
  }
  return p;
}

void SaaProblem::validate() const {
  if (R.rows() == 0 || R.cols() == 0) throw Error(ErrorCode::InvalidArgument, "return matrix is empty");
  if (!R.allFinite()) throw Error(ErrorCode::InvalidArgument, "return matrix has non-finite entries");
  if (mu.size() != R.cols()) throw Error(ErrorCode::InvalidArgument, "mu has the wrong length");
  const Eigen::VectorXd colmean = R.colwise().mean().transpose();
  const double scale = std::max(1.0, inf_norm(colmean));
  if (inf_norm(colmean - mu) > 1e-12 * scale) throw Error(ErrorCode::InvalidArgument, "mu is not the column mean of R");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  if (!std::isfinite(R0)) throw Error(ErrorCode::InvalidArgument, "R0 must be finite");
}

AdmmState initial_state(const SaaProblem& p, double sigma0) {
  if (!(sigma0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma0 must be positive");
  AdmmState st;
  const auto n = static_cast<Eigen::Index>(p.n());
  st.w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  st.t = 0.0;
  kernels::gemv(p.R, st.w, st.z);
  st.z = -st.z;
  st.s = 0.0;
  st.nu1 = Eigen::VectorXd::Zero(p.R.rows());
  st.nu2 = 0.0;
  st.sigma = sigma0;
  return st;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) return v;
  std::vector<double> s(v.data(), v.data() + n);
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cum += s[static_cast<std::size_t>(k)];
    const double cand = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[static_cast<std::size_t>(k)] - cand > 0.0) theta = cand;
  }
  return (v.array() - theta).cwiseMax(0.0).matrix();
}

double augmented_lagrangian(const SaaProblem& p, const AdmmState& st, const Eigen::VectorXd& w, double t) {
  const Eigen::VectorXd r1 = (p.R * w).array() + t + st.z.array();
  const double r2 = p.mu.dot(w) - st.s - p.R0;
  return (1.0 - p.alpha) * t - p.alpha * p.mu.dot(w) + st.nu1.dot(r1) + st.nu2 * r2 +
         0.5 * st.sigma * (r1.squaredNorm() + r2 * r2);
}

WtGradient augmented_lagrangian_gradient(const SaaProblem& p, const AdmmState& st, const Eigen::VectorXd& w,
                                         double t) {
  const Eigen::VectorXd r1 = (p.R * w).array() + t + st.z.array();
  const double r2 = p.mu.dot(w) - st.s - p.R0;
  const Eigen::VectorXd y = st.nu1 + st.sigma * r1;
  WtGradient g;
  g.w = -p.alpha * p.mu + p.R.transpose() * y + (st.nu2 + st.sigma * r2) * p.mu;
  g.t = (1.0 - p.alpha) + y.sum();
  return g;
}

WtSolver::WtSolver(const SaaProblem& problem) : problem_(&problem) {
  const auto& p = problem;
  const Eigen::MatrixXd Rc = p.R.rowwise() - p.mu.transpose();
  const auto n = p.R.cols();
  Q_ = Eigen::MatrixXd::Zero(n, n);
  Q_.selfadjointView<Eigen::Lower>().rankUpdate(Rc.transpose());
  Q_ = Q_.selfadjointView<Eigen::Lower>();
  Q_.noalias() += p.mu * p.mu.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Q_, Eigen::EigenvaluesOnly);
  lmax_ = std::max(eig.eigenvalues().maxCoeff(), 0.0);
}

WtResult WtSolver::solve(const AdmmState& st, double tol, int max_iter) const {
  const auto& p = *problem_;
  const double sigma = st.sigma;
  const double m = static_cast<double>(p.m());
  const Eigen::VectorXd b = st.z + st.nu1 / sigma;
  const double e = st.s + p.R0 - st.nu2 / sigma;
  Eigen::VectorXd Rtb;
  kernels::gemv_t(p.R, b, Rtb);
  const Eigen::VectorXd lin = sigma * (Rtb - p.mu * b.sum() - e * p.mu) - p.mu;

  double L = sigma * lmax_ * (1.0 + 1e-12);
  if (!(L > 0.0)) L = 1e-3 * std::max(1.0, inf_norm(lin));

  WtResult out;
  Eigen::VectorXd x = project_simplex(st.w);
  Eigen::VectorXd y = x;
  Eigen::VectorXd xn;
  double theta = 1.0;
  for (int k = 1; k <= max_iter; ++k) {
    out.iterations = k;
    const Eigen::VectorXd g = sigma * (Q_ * y) + lin;
    xn = project_simplex(y - g / L);
    const double res = inf_norm(xn - y);
    if ((y - xn).dot(xn - x) > 0.0) {
      theta = 1.0;  // gradient restart
      y = xn;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = xn + ((theta - 1.0) / theta_next) * (xn - x);
      theta = theta_next;
    }
    x = xn;
    if (res <= tol) {
      out.converged = true;
      break;
    }
  }
  out.w = x;
  out.t = -(p.mu.dot(x) + b.mean()) - (1.0 - p.alpha) / (sigma * m);
  return out;
}

WtResult solve_wt_subproblem(const AdmmState& state, const SaaProblem& problem, double tol, int max_iter) {
  return WtSolver(problem).solve(state, tol, max_iter);
}

ZsResult update_z_s(const AdmmState& st, const SaaProblem& p, const Eigen::VectorXd& w_new, double t_new,
                    ProjectionSolver solver, const ProjectionOptions& popt) {
  Eigen::VectorXd Rw;
  kernels::gemv(p.R, w_new, Rw);
  const Eigen::VectorXd c1 = (-st.nu1 / st.sigma - Rw).array() - t_new;
  ZsResult out;
  out.z = project_z(c1, st.z, p.lambda, p.loss, solver, popt, out.projection);
  out.s = std::max(p.mu.dot(w_new) - p.R0 + st.nu2 / st.sigma, 0.0);
  return out;
}

Multipliers dual_ascent(const AdmmState& st, const SaaProblem& p, const Eigen::VectorXd& w_new, double t_new,
                        const Eigen::VectorXd& z_new, double s_new, double sigma) {
  Eigen::VectorXd Rw;
  kernels::gemv(p.R, w_new, Rw);
  Multipliers out;
  out.nu1 = st.nu1 + sigma * ((Rw + z_new).array() + t_new).matrix();
  out.nu2 = st.nu2 + sigma * (p.mu.dot(w_new) - s_new - p.R0);
  return out;
}

double adapt_sigma(double primal, double dual, double sigma, double tau, double ratio) {
  if (primal > ratio * dual) return sigma * tau;
  if (dual > ratio * primal) return sigma / tau;
  return sigma;
}

double adapt_sigma(const AdmmState& st, double tau, double ratio) {
  if (st.residuals.empty()) throw Error(ErrorCode::InvalidArgument, "adapt_sigma needs a residual history");
  const auto& r = st.residuals.back();
  return adapt_sigma(r.primal, r.dual, st.sigma, tau, ratio);
}

namespace {

// sigma schedule with reversal damping
struct SigmaController {
  double tau;
  double ratio;
  bool damp;
  int gap = 1;
  int since = 0;
  int last_dir = 0;

  double next(double primal, double dual, double sigma) {
    ++since;
    const double proposed = adapt_sigma(primal, dual, sigma, tau, ratio);
    if (proposed == sigma || since < gap) return sigma;
    const int dir = proposed > sigma ? 1 : -1;
    if (damp && last_dir != 0 && dir != last_dir) gap *= 2;
    last_dir = dir;
    since = 0;
    return proposed;
  }
};

}  // namespace

double constraint_violation(const SaaProblem& p, const Eigen::VectorXd& w, double t) {
  Eigen::VectorXd Rw;
  kernels::gemv(p.R, w, Rw);
  double v = simplex_violation(w);
  v = std::max(v, std::max(p.R0 - p.mu.dot(w), 0.0));
  return std::max(v, shortfall_violation(Rw, t, p.lambda, p.loss));
}

SolveResult solve(const SaaProblem& p, const AdmmOptions& opt) {
  p.validate();
  if (!(opt.tau > 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must exceed 1");
  const auto t0 = Clock::now();
  SolveResult out;
  AdmmState& st = out.state;
  st = initial_state(p, opt.sigma0);
  const WtSolver wt(p);
  const double qnorm = std::max(p.alpha * inf_norm(p.mu), 1.0 - p.alpha);

  Eigen::VectorXd Rw, Rtz_old, Rtz, Rtnu;
  kernels::gemv_t(p.R, st.z, Rtz_old);
  SigmaController ctl{opt.tau, opt.adapt_ratio, opt.damp_reversals};
  auto& rep = out.report;
  for (int k = 1; k <= opt.max_iter; ++k) {
    rep.iterations = k;
    const WtResult wr = wt.solve(st, opt.inner_tol, opt.inner_max_iter);
    rep.inexact_inner = rep.inexact_inner || !wr.converged;

    const Eigen::VectorXd z_old = st.z;
    const double s_old = st.s;
    st.w = wr.w;
    st.t = wr.t;
    const ZsResult zs = update_z_s(st, p, st.w, st.t, opt.projector, opt.projection);
    st.z = zs.z;
    st.s = zs.s;

    kernels::gemv(p.R, st.w, Rw);
    const Eigen::VectorXd r1 = (Rw + st.z).array() + st.t;
    const double mw = p.mu.dot(st.w);
    const double r2 = mw - st.s - p.R0;
    st.nu1 += st.sigma * r1;
    st.nu2 += st.sigma * r2;

    kernels::gemv_t(p.R, st.z, Rtz);
    kernels::gemv_t(p.R, st.nu1, Rtnu);
    const double dsum = (st.z - z_old).sum();
    const double ds = st.s - s_old;
    const double primal = std::max(inf_norm(r1), std::abs(r2));
    const double dual = st.sigma * std::max(inf_norm(Rtz - Rtz_old - ds * p.mu), std::abs(dsum));
    std::swap(Rtz_old, Rtz);
    st.residuals.push_back({primal, dual});

    const double eps_p =
        opt.tol_abs + opt.tol_rel * std::max({inf_norm((Rw.array() + st.t).matrix()), std::abs(mw), inf_norm(st.z),
                                              st.s, std::abs(p.R0)});
    const double eps_d =
        opt.tol_abs + opt.tol_rel * std::max({inf_norm(Rtnu + st.nu2 * p.mu), std::abs(st.nu1.sum()), qnorm});
    rep.primal_residual = primal;
    rep.dual_residual = dual;
    rep.primal_tolerance = eps_p;
    rep.dual_tolerance = eps_d;
    if (primal <= eps_p && dual <= eps_d) {
      rep.converged = true;
      break;
    }
    if (opt.adaptive) st.sigma = ctl.next(primal, dual, st.sigma);
  }
  rep.objective = (1.0 - p.alpha) * st.t - p.alpha * p.mu.dot(st.w);
  rep.violation = constraint_violation(p, st.w, st.t);
  rep.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

// ---- expected-utility variant ----

double Utility::value(double x) const {
  if (kind == UtilityKind::Linear) return x;
  return -std::expm1(-gamma * x) / gamma;
}

double Utility::deriv(double x) const {
  if (kind == UtilityKind::Linear) return 1.0;
  return std::exp(-gamma * x);
}

void UtilityProblem::validate() const {
  if (R.rows() == 0 || R.cols() == 0) throw Error(ErrorCode::InvalidArgument, "return matrix is empty");
  if (!R.allFinite()) throw Error(ErrorCode::InvalidArgument, "return matrix has non-finite entries");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  if (!std::isfinite(b)) throw Error(ErrorCode::InvalidArgument, "b must be finite");
  if (utility.kind == UtilityKind::Exponential && !(utility.gamma > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "utility gamma must be positive");
  }
}

double utility_objective(const UtilityProblem& p, const Eigen::VectorXd& w) {
  const Eigen::VectorXd Rw = p.R * w;
  double s = 0.0;
  for (Eigen::Index i = 0; i < Rw.size(); ++i) s += p.utility.value(Rw[i]);
  return -s;
}

double utility_violation(const UtilityProblem& p, const Eigen::VectorXd& w) {
  Eigen::VectorXd Rw;
  kernels::gemv(p.R, w, Rw);
  return std::max(simplex_violation(w), shortfall_violation(Rw, p.b, p.lambda, p.loss));
}

namespace {

// FISTA with backtracking on f(w) = -sum u(Rw) + sigma/2 ||Rw + c||^2 over the simplex,
// c = z + b 1 + nu / sigma.
struct UtilityStep {
  Eigen::VectorXd w;
  double L;
  bool converged;
};

UtilityStep utility_w_step(const UtilityProblem& p, const Eigen::VectorXd& w0, const Eigen::VectorXd& c,
                           double sigma, double L0, double tol, int max_iter) {
  auto value = [&](const Eigen::VectorXd& w) {
    Eigen::VectorXd Rw;
    kernels::gemv(p.R, w, Rw);
    double u = 0.0;
    for (Eigen::Index i = 0; i < Rw.size(); ++i) u += p.utility.value(Rw[i]);
    return -u + 0.5 * sigma * (Rw + c).squaredNorm();
  };
  auto grad = [&](const Eigen::VectorXd& w, double& f) {
    Eigen::VectorXd Rw;
    kernels::gemv(p.R, w, Rw);
    Eigen::VectorXd v(Rw.size());
    double u = 0.0;
    for (Eigen::Index i = 0; i < Rw.size(); ++i) {
      u += p.utility.value(Rw[i]);
      v[i] = -p.utility.deriv(Rw[i]) + sigma * (Rw[i] + c[i]);
    }
    f = -u + 0.5 * sigma * (Rw + c).squaredNorm();
    Eigen::VectorXd g;
    kernels::gemv_t(p.R, v, g);
    return g;
  };

  double L = std::max(L0, 1e-300);
  Eigen::VectorXd x = project_simplex(w0), y = x, xn;
  double theta = 1.0;
  for (int k = 1; k <= max_iter; ++k) {
    double fy = 0.0;
    const Eigen::VectorXd g = grad(y, fy);
    for (int bt = 0;; ++bt) {
      xn = project_simplex(y - g / L);
      const Eigen::VectorXd d = xn - y;
      const double fx = value(xn);
      if (fx <= fy + g.dot(d) + 0.5 * L * d.squaredNorm() + 1e-12 * std::abs(fy) || bt == 60) break;
      L *= 2.0;
    }
    const double res = inf_norm(xn - y);
    if ((y - xn).dot(xn - x) > 0.0) {
      theta = 1.0;
      y = xn;
    } else {
      const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      y = xn + ((theta - 1.0) / tn) * (xn - x);
      theta = tn;
    }
    x = xn;
    if (res <= tol) return {x, L, true};
  }
  return {x, L, false};
}

}  // namespace

UtilityResult solve_utility_constrained(const UtilityProblem& p, const AdmmOptions& opt) {
  p.validate();
  if (!(opt.tau > 1.0)) throw Error(ErrorCode::InvalidArgument, "tau must exceed 1");
  if (!(opt.sigma0 > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma0 must be positive");
  const auto t0 = Clock::now();
  UtilityResult out;
  UtilityState& st = out.state;
  const auto n = p.R.cols();
  const auto mrows = p.R.rows();
  st.w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  Eigen::VectorXd Rw;
  kernels::gemv(p.R, st.w, Rw);
  st.z = (-Rw).array() - p.b;
  st.nu = Eigen::VectorXd::Zero(mrows);
  st.sigma = opt.sigma0;

  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  G.selfadjointView<Eigen::Lower>().rankUpdate(p.R.transpose());
  G = G.selfadjointView<Eigen::Lower>();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
  const double gmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  double Lu = 0.0;  // curvature estimate of -U, grown by backtracking

  Eigen::VectorXd Rtz_old, Rtz, Rtnu, up(mrows), Rtup;
  kernels::gemv_t(p.R, st.z, Rtz_old);
  SigmaController ctl{opt.tau, opt.adapt_ratio, opt.damp_reversals};
  auto& rep = out.report;
  for (int k = 1; k <= opt.max_iter; ++k) {
    rep.iterations = k;
    const Eigen::VectorXd c = (st.z.array() + p.b).matrix() + st.nu / st.sigma;
    const double L0 = st.sigma * gmax + Lu;
    const UtilityStep ws = utility_w_step(p, st.w, c, st.sigma, L0, opt.inner_tol, opt.inner_max_iter);
    Lu = std::max(0.0, ws.L - st.sigma * gmax);
    rep.inexact_inner = rep.inexact_inner || !ws.converged;
    st.w = ws.w;

    kernels::gemv(p.R, st.w, Rw);
    const Eigen::VectorXd c1 = ((-st.nu / st.sigma - Rw).array() - p.b).matrix();
    const Eigen::VectorXd z_old = st.z;
    ProjectionResult pr;
    st.z = project_z(c1, st.z, p.lambda, p.loss, opt.projector, opt.projection, pr);

    const Eigen::VectorXd r = (Rw + st.z).array() + p.b;
    st.nu += st.sigma * r;
    kernels::gemv_t(p.R, st.z, Rtz);
    kernels::gemv_t(p.R, st.nu, Rtnu);
    for (Eigen::Index i = 0; i < mrows; ++i) up[i] = p.utility.deriv(Rw[i]);
    kernels::gemv_t(p.R, up, Rtup);

    const double primal = inf_norm(r);
    const double dual = st.sigma * inf_norm(Rtz - Rtz_old);
    std::swap(Rtz_old, Rtz);
    st.residuals.push_back({primal, dual});
    const double eps_p = opt.tol_abs + opt.tol_rel * std::max({inf_norm(Rw), inf_norm(st.z), std::abs(p.b)});
    const double eps_d = opt.tol_abs + opt.tol_rel * std::max(inf_norm(Rtnu), inf_norm(Rtup));
    rep.primal_residual = primal;
    rep.dual_residual = dual;
    rep.primal_tolerance = eps_p;
    rep.dual_tolerance = eps_d;
    out.coupling_residual = primal;
    if (primal <= eps_p && dual <= eps_d) {
      rep.converged = true;
      break;
    }
    if (opt.adaptive) st.sigma = ctl.next(primal, dual, st.sigma);
  }
  rep.objective = utility_objective(p, st.w);
  rep.violation = utility_violation(p, st.w);
  rep.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return out;
}

}  // namespace ubsr

#pragma once

// ADMM for the sample-average shortfall-risk portfolio problem
//   min (1-alpha) t - alpha mu^T w
//   s.t. w in W, (1/m) sum l(-R_i w - t) <= lambda, mu^T w >= R0
// split as z = -R w - t 1 in Z and mu^T w - s = R0 with s >= 0.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ubsr/loss.hpp"
#include "ubsr/projection.hpp"

namespace ubsr {

enum class WeightSet { Simplex };

struct SaaProblem {
  Eigen::MatrixXd R;  // m x n, one scenario per row
  Eigen::VectorXd mu;
  double lambda = 0.1;
  double alpha = 0.0;
  double R0 = 0.0;
  LossFunction loss = LossFunction::exponential(1.0);
  WeightSet weight_set = WeightSet::Simplex;
  std::vector<std::string> warnings;

  // Recomputes mu from R. R0 defaults to the return of the 1/n portfolio.
  static SaaProblem make(Eigen::MatrixXd R, double lambda, double alpha, const LossFunction& loss,
                         std::optional<double> R0 = std::nullopt);
  void validate() const;
  std::size_t m() const { return static_cast<std::size_t>(R.rows()); }
  std::size_t n() const { return static_cast<std::size_t>(R.cols()); }
};

double equal_weight_return(const Eigen::VectorXd& mu);

struct ResidualPair {
  double primal;
  double dual;
};

struct AdmmState {
  Eigen::VectorXd w;
  double t = 0.0;
  Eigen::VectorXd z;
  double s = 0.0;
  Eigen::VectorXd nu1;
  double nu2 = 0.0;
  double sigma = 1e-6;
  std::vector<ResidualPair> residuals;
};

// w0 = 1/n, t0 = 0, s0 = 0, z0 = -R w0 - t0 (not projected), multipliers 0.
AdmmState initial_state(const SaaProblem& problem, double sigma0);

// Euclidean projection onto {w >= 0, sum w = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v);

// L_sigma at (w, t) with z, s, nu1, nu2, sigma taken from the state, and its
// gradient in (w, t).
double augmented_lagrangian(const SaaProblem& problem, const AdmmState& state, const Eigen::VectorXd& w,
                            double t);
struct WtGradient {
  Eigen::VectorXd w;
  double t;
};
WtGradient augmented_lagrangian_gradient(const SaaProblem& problem, const AdmmState& state,
                                         const Eigen::VectorXd& w, double t);

struct WtResult {
  Eigen::VectorXd w;
  double t = 0.0;
  int iterations = 0;
  bool converged = false;  // false: iteration cap hit, the inexact iterate is still returned
};

// Reusable (w,t)-step. t is minimized out exactly, which leaves a quadratic in
// w with Hessian sigma (Rc^T Rc + mu mu^T), Rc = R with column means removed.
class WtSolver {
 public:
  explicit WtSolver(const SaaProblem& problem);
  WtResult solve(const AdmmState& state, double tol, int max_iter) const;
  double hessian_scale() const { return lmax_; }  // largest eigenvalue of Rc^T Rc + mu mu^T

 private:
  const SaaProblem* problem_;
  Eigen::MatrixXd Q_;
  double lmax_ = 0.0;
};

WtResult solve_wt_subproblem(const AdmmState& state, const SaaProblem& problem, double tol = 1e-8,
                             int max_iter = 500);

struct ZsResult {
  Eigen::VectorXd z;
  double s = 0.0;
  ProjectionResult projection;
};

ZsResult update_z_s(const AdmmState& state, const SaaProblem& problem, const Eigen::VectorXd& w_new,
                    double t_new, ProjectionSolver solver = ProjectionSolver::SepSSN,
                    const ProjectionOptions& popt = {});

struct Multipliers {
  Eigen::VectorXd nu1;
  double nu2;
};

Multipliers dual_ascent(const AdmmState& state, const SaaProblem& problem, const Eigen::VectorXd& w_new,
                        double t_new, const Eigen::VectorXd& z_new, double s_new, double sigma);

// sigma * tau when primal > ratio * dual, sigma / tau when dual > ratio * primal.
double adapt_sigma(double primal, double dual, double sigma, double tau, double ratio = 10.0);
double adapt_sigma(const AdmmState& state, double tau, double ratio = 10.0);

// max{ max_i [w_i]_-, |1^T w - 1|, [mu^T w - R0]_-, [mean l(-R w - t) - lambda]_+ }.
double constraint_violation(const SaaProblem& problem, const Eigen::VectorXd& w, double t);

struct AdmmOptions {
  double sigma0 = 1e-6;
  double tau = 1.7;
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
  int max_iter = 1000;
  double inner_tol = 1e-8;
  int inner_max_iter = 500;
  double adapt_ratio = 10.0;
  bool adaptive = true;
  // Each time sigma changes direction the minimum gap between changes doubles,
  // which stops residual balancing from cycling on small problems.
  bool damp_reversals = true;
  ProjectionSolver projector = ProjectionSolver::SepSSN;
  ProjectionOptions projection;
};

struct SolveReport {
  double objective = 0.0;
  double violation = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  bool converged = false;
  bool inexact_inner = false;  // some (w,t)-step hit its iteration cap
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;
};

struct SolveResult {
  SolveReport report;
  AdmmState state;
};

SolveResult solve(const SaaProblem& problem, const AdmmOptions& opt = {});

// Expected-utility variant: max sum u(R w) s.t. w in W, shortfall risk of R w at most b.
enum class UtilityKind { Linear, Exponential };

// Linear: u(x) = x.  Exponential: u(x) = (1 - exp(-gamma x)) / gamma, concave and increasing.
struct Utility {
  UtilityKind kind = UtilityKind::Linear;
  double gamma = 1.0;
  double value(double x) const;
  double deriv(double x) const;
};

struct UtilityProblem {
  Eigen::MatrixXd R;
  double b = 0.0;
  double lambda = 0.1;
  LossFunction loss = LossFunction::exponential(1.0);
  Utility utility;
  void validate() const;
};

struct UtilityState {
  Eigen::VectorXd w;
  Eigen::VectorXd z;
  Eigen::VectorXd nu;
  double sigma = 1e-6;
  std::vector<ResidualPair> residuals;
};

struct UtilityResult {
  SolveReport report;  // objective is -sum u(R w)
  UtilityState state;
  double coupling_residual = 0.0;  // ||R w + z + b 1||_inf
};

// Simplex violation combined with [mean l(-R w - b) - lambda]_+.
double utility_violation(const UtilityProblem& problem, const Eigen::VectorXd& w);
double utility_objective(const UtilityProblem& problem, const Eigen::VectorXd& w);

UtilityResult solve_utility_constrained(const UtilityProblem& problem, const AdmmOptions& opt = {});

}  // namespace ubsr

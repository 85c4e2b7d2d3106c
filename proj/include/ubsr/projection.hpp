#pragma once

// Euclidean projection onto Z = { u : (1/m) sum l(u_i) <= lambda }.
//
// Every solver returns u together with the multiplier rho of the constraint
// written as (rho/m)(sum l(u) - m lambda), so at the solution
//   u - x + (rho/m) l'(u) = 0,  mean l(u) <= lambda,  rho (mean l(u) - lambda) = 0.

#include <span>
#include <string>
#include <vector>

#include "ubsr/loss.hpp"

namespace ubsr {

struct ProjectionInstance {
  std::vector<double> x;
  double lambda = 0.0;
  LossFunction loss = LossFunction::exponential(1.0);

  // Throws InvalidArgument for empty x, non-finite entries, or lambda <= 0
  // (lambda <= 0 makes Z empty for the exponential loss and is rejected for both).
  void validate() const;
};

enum class ProjectionSolver { DirSSN, SepSSN, Bisection, IPM };

const char* to_string(ProjectionSolver solver);
ProjectionSolver projection_solver_from_string(const std::string& name);

struct IterationCounts {
  int outer = 0;
  long inner = 0;
  int backtracks = 0;
};

struct NewtonStep {
  double residual;  // |H(rho)| for SepSSN, ||F|| for DirSSN and IPM
  double rho;
  double step;      // accepted step length
  bool fallback;    // bisection or doubling replaced the Newton step
};

struct ProjectionResult {
  std::vector<double> u;
  double rho = 0.0;
  double kkt_residual = 0.0;
  IterationCounts iterations;
  ProjectionSolver solver = ProjectionSolver::SepSSN;
  bool interior = false;           // x already in Z
  bool surrogate_hessian = false;  // IPM with eta = 2 uses a generalized Hessian element
  std::vector<NewtonStep> trace;
};

struct KktCertificate {
  double stationarity = 0.0;     // || u - x + (rho/m) l'(u) ||_inf
  double feasibility = 0.0;      // max(mean l(u) - lambda, 0)
  double complementarity = 0.0;  // | rho (mean l(u) - lambda) |
  double dual_sign = 0.0;        // max(-rho, 0)
  double max() const;
};

KktCertificate kkt_certificate(const ProjectionInstance& inst, std::span<const double> u, double rho);

// Margin lambda - mean l(x); -inf if an exponential term overflows.
double membership_margin(const ProjectionInstance& inst);
inline constexpr double kMembershipSlack = 1e-12;

struct DirSsnOptions {
  std::vector<double> u0;  // empty: start from x
  double sigma = 1e-4;
  double beta = 0.5;
  double rho0 = 0.0;  // 0 picks m, i.e. unit weight on each l'(u_i)
  double tol = 1e-10;
  int max_iter = 10000;
  int max_backtracks = 60;
};

struct SepSsnOptions {
  double rho0 = 1.0;
  double tol = 1e-10;
  double inner_tol = 1e-14;
  int max_iter = 100;
  int inner_max_iter = 200;
};

struct BisectionOptions {
  double rho_upper0 = 1.0;
  double tol = 1e-10;  // absolute width of the final rho bracket
  double inner_tol = 1e-14;
  int max_doublings = 200;
  int max_iter = 1000;
};

struct IpmOptions {
  double mu = 0.0;  // 0 picks 10, or 50 when m >= 1e4
  double gamma = 0.5;
  double nu = 0.05;
  double y0 = 10.0;
  double tol = 1e-9;
  int max_iter = 200;
  int max_backtracks = 100;
};

struct ProjectionOptions {
  DirSsnOptions dirssn;
  SepSsnOptions sepssn;
  BisectionOptions bisection;
  IpmOptions ipm;
};

ProjectionResult project_dirssn(const ProjectionInstance& inst, const DirSsnOptions& opt = {});

// warm_start, when non-empty, seeds the coordinate solves (same length as x).
ProjectionResult project_sepssn(const ProjectionInstance& inst, const SepSsnOptions& opt = {},
                                std::span<const double> warm_start = {});

ProjectionResult project_bisection(const ProjectionInstance& inst, const BisectionOptions& opt = {});

ProjectionResult project_ipm(const ProjectionInstance& inst, const IpmOptions& opt = {});

ProjectionResult project(const ProjectionInstance& inst, ProjectionSolver solver,
                         const ProjectionOptions& opt = {});

// Closed form for eta = 2 when x is outside Z: u = x_+ m / (m + rho) on the
// positive part, u = x elsewhere, with rho = m (sqrt(sum x_+^2 / (2 m lambda)) - 1).
ProjectionResult project_quadratic_closed_form(const ProjectionInstance& inst);

}  // namespace ubsr

// Acceptance run: one PASS/FAIL line per criterion.
//   ubsr_acceptance          run all ten
//   ubsr_acceptance 3 7      run a subset
//   --expect-fail K          criterion K still prints its line but does not set the exit code

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "grid_oracle.hpp"
#include "oracles.hpp"
#include "ubsr/admm.hpp"
#include "ubsr/backtest.hpp"
#include "ubsr/data.hpp"
#include "ubsr/estimate.hpp"
#include "ubsr/projection.hpp"

using namespace ubsr;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const std::vector<ProjectionSolver> kSolvers{ProjectionSolver::DirSSN, ProjectionSolver::SepSSN,
                                             ProjectionSolver::Bisection, ProjectionSolver::IPM};

std::vector<LossFunction> projection_losses() {
  return {LossFunction::exponential(0.5), LossFunction::exponential(1.0), LossFunction::piecewise_polynomial(2.0),
          LossFunction::piecewise_polynomial(3.0)};
}

std::vector<double> standard_normal(std::size_t m, std::uint64_t seed) {
  NormalStream s(seed);
  std::vector<double> x(m);
  for (auto& v : x) v = s.next();
  return x;
}

// ---- 1 and 3 share one sweep ----

struct Sweep {
  bool done = false;
  double seconds = 0.0;
  long solves = 0;
  long kkt_fail = 0;
  long errors = 0;
  double worst_kkt = 0.0;
  double worst_gap = 0.0;  // max over instances and solver pairs of ||u_A - u_B||_inf
  std::string first_error;
};

Sweep& sweep() {
  static Sweep s;
  if (s.done) return s;
  const auto t0 = Clock::now();
  const std::vector<std::size_t> dims{1, 10, 1000, 100000};
  const auto losses = projection_losses();
  std::uint64_t seed = 1;
  for (std::size_t m : dims) {
    for (const auto& loss : losses) {
      for (double lambda : {0.1, 0.2}) {
        std::fprintf(stderr, "  sweep m=%zu %s lambda=%.1f at %.0f s\n", m, loss.describe().c_str(), lambda, since(t0));
        for (int r = 0; r < 100; ++r) {
          ProjectionInstance inst{standard_normal(m, seed++), lambda, loss};
          std::vector<std::vector<double>> us;
          for (ProjectionSolver solver : kSolvers) {
            ++s.solves;
            try {
              const auto pr = project(inst, solver);
              const auto c = kkt_certificate(inst, pr.u, pr.rho);
              const double k = std::max({c.stationarity, c.feasibility, c.complementarity, c.dual_sign});
              s.worst_kkt = std::max(s.worst_kkt, k);
              if (!(k <= 1e-8)) ++s.kkt_fail;
              us.push_back(pr.u);
            } catch (const Error& e) {
              ++s.errors;
              if (s.first_error.empty()) s.first_error = std::string(to_string(solver)) + ": " + e.what();
            }
          }
          for (std::size_t a = 0; a < us.size(); ++a) {
            for (std::size_t b = a + 1; b < us.size(); ++b) {
              for (std::size_t i = 0; i < m; ++i) s.worst_gap = std::max(s.worst_gap, std::abs(us[a][i] - us[b][i]));
            }
          }
        }
      }
    }
  }
  s.seconds = since(t0);
  s.done = true;
  return s;
}

Outcome c1() {
  const auto& s = sweep();
  const bool ok = s.kkt_fail == 0 && s.errors == 0;
  const bool fast = s.seconds < 120.0;
  return {ok && fast, fmt("%ld solves, %ld over 1e-8, %ld errors, worst residual %.2e, %.1f s (limit 120 s)%s%s",
                          s.solves, s.kkt_fail, s.errors, s.worst_kkt, s.seconds,
                          s.first_error.empty() ? "" : "; first error: ", s.first_error.c_str())};
}

Outcome c3() {
  const auto& s = sweep();
  return {s.errors == 0 && s.worst_gap <= 1e-6,
          fmt("max ||u_A - u_B||_inf = %.2e over all solver pairs (limit 1e-6), %ld errors", s.worst_gap, s.errors)};
}

// ---- 2 ----

Outcome c2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  int count = 0;
  std::uint64_t seed = 5000;
  for (std::size_t m : {std::size_t{1}, std::size_t{10}, std::size_t{1000}, std::size_t{100000}}) {
    for (double lambda : {0.1, 0.2}) {
      for (int r = 0; r < (m == 100000 ? 2 : 10); ++r) {
        ProjectionInstance inst{standard_normal(m, seed++), lambda, LossFunction::piecewise_polynomial(2.0)};
        if (membership_margin(inst) >= 0.0) continue;
        const auto ref = oracle::quadratic_projection(inst.x, lambda);
        for (ProjectionSolver s : kSolvers) {
          const auto pr = project(inst, s);
          for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(pr.u[i] - ref.u[i]));
          ++count;
        }
      }
    }
  }
  return {worst <= 1e-8, fmt("%d solves, max deviation from the explicit form %.2e (limit 1e-8), %.1f s", count, worst,
                             since(t0))};
}

// ---- 4 ----

Outcome c4() {
  double worst = 0.0;
  int n = 0;
  std::uint64_t seed = 9000;
  for (const auto& loss : projection_losses()) {
    for (double lambda : {0.1, 0.2}) {
      ProjectionInstance inst{standard_normal(100000, seed++), lambda, loss};
      const auto t0 = Clock::now();
      project_sepssn(inst);
      worst = std::max(worst, since(t0));
      ++n;
    }
  }
  return {worst < 10.0, fmt("%d instances at m = 1e5, slowest %.3f s (limit 10 s)", n, worst)};
}

// ---- 5 ----

Outcome c5() {
  int total = 0, good = 0;
  std::uint64_t seed = 12000;
  for (const auto& loss : {LossFunction::exponential(0.5), LossFunction::exponential(1.0),
                           LossFunction::piecewise_polynomial(3.0)}) {
    for (double lambda : {0.1, 0.2}) {
      for (std::size_t m : {std::size_t{10}, std::size_t{1000}, std::size_t{100000}}) {
        for (int r = 0; r < (m == 100000 ? 3 : 30); ++r) {
          ProjectionInstance inst{standard_normal(m, seed++), lambda, loss};
          if (membership_margin(inst) >= 0.0) continue;
          const auto pr = project_sepssn(inst);
          ++total;
          const auto& tr = pr.trace;
          // a single H evaluation is finite termination
          if (tr.size() < 2 || tr.back().residual == 0.0 ||
              tr.back().residual / tr[tr.size() - 2].residual < 0.1) {
            ++good;
          }
        }
      }
    }
  }
  const double frac = total ? static_cast<double>(good) / total : 1.0;
  return {frac >= 0.95, fmt("last ratio < 0.1 on %d of %d instances (%.1f%%, need 95%%)", good, total, 100 * frac)};
}

// ---- 6 ----

Outcome c6() {
  bool ok = true;
  std::string d;
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{5000, 500}, {5000, 1000}}) {
    SyntheticSpec spec;
    spec.m = m;
    spec.n = n;
    spec.seed = 2024;
    const auto tab = generate_synthetic(spec);
    const auto p = SaaProblem::make(tab.values, 0.1, 0.5, LossFunction::exponential(0.5));
    AdmmOptions o;
    o.sigma0 = 1e-6;
    o.tau = 1.7;
    o.tol_abs = 1e-6;
    o.tol_rel = 0.0;
    o.max_iter = 1000;
    const auto t0 = Clock::now();
    const auto r = solve(p, o);
    const double secs = since(t0);
    const bool cell = r.report.converged && r.report.violation <= 1e-5 && r.report.primal_residual <= 1e-6 &&
                      r.report.dual_residual <= 1e-6 && r.report.iterations <= 1000 && secs <= 150.0;
    ok = ok && cell;
    const double band = std::abs(r.report.objective - 1.8186) / 1.8186;
    d += fmt("(%zu,%zu): %s iters %d, violation %.1e, residuals %.1e/%.1e, %.1f s, objective %.4f (%s 5%% of 1.8186); ",
             m, n, r.report.converged ? "converged" : "NOT converged", r.report.iterations, r.report.violation,
             r.report.primal_residual, r.report.dual_residual, secs, r.report.objective,
             band <= 0.05 ? "within" : "outside");
  }
  return {ok, d};
}

// ---- 7 ----

Outcome c7() {
  const auto t0 = Clock::now();
  std::mt19937_64 g(7);
  std::normal_distribution<double> N(0.0, 0.5);
  std::uniform_real_distribution<double> U(0.0, 0.9);
  double worst = 0.0;
  int count = 0, unconverged = 0;
  for (const auto& loss : projection_losses()) {
    const oracle::Loss ol{loss.kind() == LossKind::Exponential, loss.parameter()};
    for (double lambda : {0.1, 0.2}) {
      for (int r = 0; r < 20; ++r) {
        Eigen::MatrixXd R(3, 2);
        for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = N(g);
        const double alpha = U(g);
        const auto p = SaaProblem::make(R, lambda, alpha, loss);
        AdmmOptions o;
        o.tol_abs = 1e-9;
        o.tol_rel = 1e-9;
        o.max_iter = 100000;
        const auto res = solve(p, o);
        if (!res.report.converged) ++unconverged;
        const double ref = oracle::grid_objective(R, lambda, alpha, p.R0, ol);
        worst = std::max(worst, std::abs(res.report.objective - ref));
        ++count;
      }
    }
  }
  const double secs = since(t0);
  return {worst <= 1e-4 && secs < 60.0,
          fmt("%d instances, max |obj - grid| = %.2e (limit 1e-4), %d not converged, %.1f s (limit 60 s)", count,
              worst, unconverged, secs)};
}

// ---- 8 ----

Outcome c8() {
  double worst = 0.0;
  int count = 0;
  for (double c : {-2.0, -0.5, 0.0, 0.3, 1.0, 4.0}) {
    for (double lambda : {0.01, 0.1, 0.2, 1.0, 2.5}) {
      for (std::size_t m : {std::size_t{1}, std::size_t{5}, std::size_t{1000}}) {
        const std::vector<double> x(m, c);
        for (double beta : {0.5, 1.0, 2.0}) {
          const double t = estimate_ubsr(x, lambda, LossFunction::exponential(beta)).t;
          worst = std::max(worst, std::abs(t - (-c - std::log(lambda) / beta)));
          ++count;
        }
        for (double eta : {2.0, 3.0, 4.5}) {
          const double t = estimate_ubsr(x, lambda, LossFunction::piecewise_polynomial(eta)).t;
          worst = std::max(worst, std::abs(t - (-std::pow(eta * lambda, 1.0 / eta) - c)));
          ++count;
        }
      }
    }
  }
  return {worst <= 1e-9, fmt("%d cases, max error %.2e (limit 1e-9)", count, worst)};
}

// ---- 9 ----

Outcome c9() {
  std::mt19937_64 g(99);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_int_distribution<int> M(1, 12), Nn(1, 6);
  std::uniform_real_distribution<double> A(0.0, 0.95), S(1e-3, 10.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const int m = M(g), n = Nn(g);
    Eigen::MatrixXd R(m, n);
    for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = 0.3 * N(g);
    const auto p = SaaProblem::make(R, 0.1, A(g), k % 2 ? LossFunction::exponential(1.0)
                                                        : LossFunction::piecewise_polynomial(3.0));
    AdmmState st = initial_state(p, S(g));
    for (int i = 0; i < m; ++i) {
      st.z[i] = N(g);
      st.nu1[i] = N(g);
    }
    st.s = std::abs(N(g));
    st.nu2 = N(g);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w[i] = N(g);
    const double t = N(g);
    const auto grad = augmented_lagrangian_gradient(p, st, w, t);
    auto rel = [](double fd, double an) { return std::abs(fd - an) / std::max(1.0, std::abs(fd)); };
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (augmented_lagrangian(p, st, wp, t) - augmented_lagrangian(p, st, wm, t)) / (2 * h);
      worst = std::max(worst, rel(fd, grad.w[i]));
    }
    const double fd = (augmented_lagrangian(p, st, w, t + h) - augmented_lagrangian(p, st, w, t - h)) / (2 * h);
    worst = std::max(worst, rel(fd, grad.t));
  }
  return {worst <= 1e-6, fmt("50 instances, max relative mismatch %.2e (limit 1e-6)", worst)};
}

// ---- 10 ----

Outcome c10() {
  std::mt19937_64 g(10);
  std::normal_distribution<double> N(0.0005, 0.02);
  std::uniform_int_distribution<int> L(1, 500);
  int dd_mismatch = 0;
  double sharpe_err = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> r(static_cast<std::size_t>(L(g)));
    for (auto& v : r) v = N(g);
    if (max_drawdown(r) != oracle::drawdown_bruteforce(r)) ++dd_mismatch;
    if (r.size() < 2) continue;
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= r.size();
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    const double vol = std::sqrt(var / r.size());
    const auto m = series_metrics(r);
    sharpe_err = std::max(sharpe_err, m.sharpe ? std::abs(*m.sharpe - mean / vol) : 1.0);
  }
  SyntheticSpec spec;
  spec.n = 5;
  spec.m = 300;
  spec.seed = 77;
  const auto tab = generate_synthetic(spec);
  BacktestConfig cfg;
  cfg.window = 250;
  cfg.alpha = 0.3;
  cfg.lambda = 0.1;
  cfg.loss = LossFunction::exponential(0.5);
  const auto a = run_backtest(tab, cfg);
  const auto b = run_backtest(tab, cfg);
  const bool det = a.daily_oos_returns == b.daily_oos_returns && a.daily_oos_returns.size() + a.failures == 50;
  return {dd_mismatch == 0 && sharpe_err <= 1e-12 && det,
          fmt("drawdown mismatches %d/100, max Sharpe error %.2e (limit 1e-12), synthetic run %s (%zu days, %zu "
              "failures, Sharpe %s)",
              dd_mismatch, sharpe_err, det ? "deterministic" : "NOT deterministic", a.daily_oos_returns.size(),
              a.failures, a.metrics.sharpe ? fmt("%.4f", *a.metrics.sharpe).c_str() : "null")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"projection KKT certificate", c1},  {"explicit form for the quadratic loss", c2},
      {"cross-solver agreement", c3},      {"SepSSN at m = 1e5 under 10 s", c4},
      {"superlinear tail", c5},            {"ADMM feasibility at scale", c6},
      {"two-asset grid equivalence", c7},  {"estimator closed forms", c8},
      {"Lagrangian gradient check", c9},   {"backtest metrics", c10},
  };
  std::vector<int> pick;
  std::vector<bool> expected_fail(11, false);
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--expect-fail" && i + 1 < argc) {
      const int k = std::atoi(argv[++i]);
      if (k >= 1 && k <= 10) expected_fail[k] = true;
    } else {
      pick.push_back(std::atoi(argv[i]));
    }
  }
  if (pick.empty()) {
    for (int i = 1; i <= 10; ++i) pick.push_back(i);
  }
  int failed = 0;
  for (int k : pick) {
    if (k < 1 || k > 10) {
      std::fprintf(stderr, "no criterion %d\n", k);
      return 2;
    }
    Outcome o;
    try {
      o = criteria[k - 1].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass && !expected_fail[k]) ++failed;
    std::printf("%s %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", k, criteria[k - 1].first, o.detail.c_str(),
                !o.pass && expected_fail[k] ? " [known failure, see notes]" : "");
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}

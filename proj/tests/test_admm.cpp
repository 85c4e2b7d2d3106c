#include <doctest.h>

#include <random>

#include "grid_oracle.hpp"
#include "oracles.hpp"
#include "ubsr/admm.hpp"
#include "ubsr/data.hpp"

using namespace ubsr;

namespace {

const LossFunction kPoly2 = LossFunction::piecewise_polynomial(2.0);

SaaProblem tiny_problem(std::mt19937_64& g, const LossFunction& l, double lambda, double& alpha) {
  std::normal_distribution<double> N(0.0, 0.5);
  std::uniform_real_distribution<double> U(0.0, 0.9);
  Eigen::MatrixXd R(3, 2);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = N(g);
  alpha = U(g);
  return SaaProblem::make(R, lambda, alpha, l);
}

AdmmState random_state(const SaaProblem& p, std::mt19937_64& g) {
  std::normal_distribution<double> N(0.0, 1.0);
  AdmmState st = initial_state(p, 0.7);
  for (Eigen::Index i = 0; i < st.z.size(); ++i) {
    st.z[i] = N(g);
    st.nu1[i] = N(g);
  }
  st.s = std::abs(N(g));
  st.nu2 = N(g);
  return st;
}

oracle::Loss as_oracle(const LossFunction& l) {
  return {l.kind() == LossKind::Exponential, l.parameter()};
}

AdmmOptions tight() {
  AdmmOptions o;
  o.tol_abs = 1e-9;
  o.tol_rel = 1e-9;
  o.max_iter = 100000;
  return o;
}

}  // namespace

TEST_SUITE("admm") {
  TEST_CASE("simplex projection") {
    CHECK(project_simplex(Eigen::Vector2d(0.5, 0.5)).isApprox(Eigen::Vector2d(0.5, 0.5)));
    CHECK(project_simplex(Eigen::Vector2d(1.0, 1.0)).isApprox(Eigen::Vector2d(0.5, 0.5)));
    CHECK(project_simplex(Eigen::Vector2d(2.0, 0.0)).isApprox(Eigen::Vector2d(1.0, 0.0)));
    // n = 2 brute force over a fine line search of the segment
    std::mt19937_64 g(1);
    std::normal_distribution<double> N(0.0, 2.0);
    for (int k = 0; k < 50; ++k) {
      const Eigen::Vector2d v(N(g), N(g));
      double best_a = 0.0, best = 1e300;
      for (int j = 0; j <= 100000; ++j) {
        const double a = j * 1e-5;
        const double d = (v - Eigen::Vector2d(a, 1.0 - a)).squaredNorm();
        if (d < best) best = d, best_a = a;
      }
      const auto p = project_simplex(v);
      CHECK(std::abs(p[0] - best_a) <= 1e-5);
      CHECK(std::abs(p.sum() - 1.0) <= 1e-15);
      CHECK(p.minCoeff() >= 0.0);
    }
  }

  TEST_CASE("initial state") {
    Eigen::MatrixXd R(2, 2);
    R << 0.1, 0.3, -0.1, 0.5;
    const auto p = SaaProblem::make(R, 0.1, 0.2, kPoly2);
    CHECK(p.R0 == doctest::Approx(0.2));
    const auto st = initial_state(p, 1e-6);
    CHECK(st.w.isApprox(Eigen::Vector2d(0.5, 0.5)));
    CHECK(st.z.isApprox(Eigen::Vector2d(-0.2, -0.2)));
    CHECK(st.t == 0.0);
    CHECK(st.nu1.isZero());
    CHECK(st.sigma == 1e-6);
  }

  TEST_CASE("t step for a single asset") {
    Eigen::MatrixXd R(2, 1);
    R << 0.3, -0.1;
    auto p = SaaProblem::make(R, 0.1, 0.25, kPoly2, 0.0);
    AdmmState st = initial_state(p, 2.0);
    st.z << 0.4, -0.7;
    st.nu1 << 0.2, 0.6;
    const auto r = solve_wt_subproblem(st, p, 1e-12, 500);
    CHECK(r.w[0] == 1.0);
    double acc = 0.0;
    for (int i = 0; i < 2; ++i) acc += st.nu1[i] / st.sigma + R(i, 0) + st.z[i];
    const double t = (-acc - (1.0 - p.alpha) / st.sigma) / 2.0;
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
  }

  TEST_CASE("t step on zero data") {
    const Eigen::MatrixXd R = Eigen::MatrixXd::Zero(4, 3);
    auto p = SaaProblem::make(R, 0.1, 0.0, kPoly2, 0.0);
    AdmmState st = initial_state(p, 0.5);
    st.z.setZero();
    const auto r = solve_wt_subproblem(st, p, 1e-12, 500);
    CHECK(r.t == doctest::Approx(-1.0 / (0.5 * 4.0)).epsilon(1e-12));
  }

  TEST_CASE("lagrangian gradient matches central differences") {
    std::mt19937_64 g(17);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int k = 0; k < 50; ++k) {
      Eigen::MatrixXd R(5, 3);
      for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = 0.3 * N(g);
      const auto p = SaaProblem::make(R, 0.1, 0.4, kPoly2);
      const auto st = random_state(p, g);
      Eigen::VectorXd w(3);
      for (int i = 0; i < 3; ++i) w[i] = N(g);
      const double t = N(g);
      const auto grad = augmented_lagrangian_gradient(p, st, w, t);
      const double h = 1e-6;
      for (int i = 0; i < 3; ++i) {
        Eigen::VectorXd wp = w, wm = w;
        wp[i] += h;
        wm[i] -= h;
        const double fd = (augmented_lagrangian(p, st, wp, t) - augmented_lagrangian(p, st, wm, t)) / (2 * h);
        CHECK(std::abs(fd - grad.w[i]) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
      const double fd = (augmented_lagrangian(p, st, w, t + h) - augmented_lagrangian(p, st, w, t - h)) / (2 * h);
      CHECK(std::abs(fd - grad.t) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }

  TEST_CASE("w step is a fixed point of projected gradient") {
    std::mt19937_64 g(23);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
      Eigen::MatrixXd R(8, 4);
      for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = 0.2 * N(g);
      const auto p = SaaProblem::make(R, 0.1, 0.3, kPoly2);
      const auto st = random_state(p, g);
      const auto r = solve_wt_subproblem(st, p, 1e-12, 20000);
      CHECK(r.converged);
      const auto grad = augmented_lagrangian_gradient(p, st, r.w, r.t);
      CHECK(std::abs(grad.t) <= 1e-8);
      const Eigen::VectorXd step = project_simplex(r.w - 0.01 * grad.w);
      CHECK((step - r.w).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("z and s step") {
    // interior c1 is kept
    Eigen::MatrixXd R(2, 1);
    R << 1.0, 2.0;
    auto p = SaaProblem::make(R, 0.1, 0.0, kPoly2, 0.0);
    AdmmState st = initial_state(p, 1.0);
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
    auto zs = update_z_s(st, p, w, 0.0);
    CHECK(zs.z.isApprox(Eigen::Vector2d(-1.0, -2.0)));
    CHECK(zs.projection.interior);

    // mu^T w - R0 + nu2 / sigma = -0.3 clamps s to 0
    p.R0 = 1.5 + 0.3;
    zs = update_z_s(st, p, w, 0.0);
    CHECK(zs.s == 0.0);
    p.R0 = 1.0;
    zs = update_z_s(st, p, w, 0.0);
    CHECK(zs.s == doctest::Approx(0.5));

    // m = 1 with c1 = [1] projects to [0.5]
    Eigen::MatrixXd R1(1, 1);
    R1 << 0.0;
    auto p1 = SaaProblem::make(R1, 0.125, 0.0, kPoly2, 0.0);
    AdmmState s1 = initial_state(p1, 1.0);
    zs = update_z_s(s1, p1, Eigen::VectorXd::Ones(1), -1.0);
    CHECK(zs.z[0] == doctest::Approx(0.5).epsilon(1e-10));
  }

  TEST_CASE("dual ascent") {
    Eigen::MatrixXd R(1, 1);
    R << 0.0;
    auto p = SaaProblem::make(R, 0.1, 0.0, kPoly2, 0.0);
    AdmmState st = initial_state(p, 2.0);
    st.nu1 << 0.25;
    st.nu2 = -0.5;
    const Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
    auto mm = dual_ascent(st, p, w, 0.0, Eigen::VectorXd::Zero(1), 0.0, 2.0);
    CHECK(mm.nu1[0] == 0.25);
    CHECK(mm.nu2 == -0.5);
    Eigen::VectorXd z(1);
    z << 0.5;
    mm = dual_ascent(st, p, w, 0.0, z, 0.0, 2.0);
    CHECK(mm.nu1[0] - 0.25 == doctest::Approx(1.0));
  }

  TEST_CASE("sigma adaptation") {
    CHECK(adapt_sigma(1.0, 0.05, 1.0, 2.7) == doctest::Approx(2.7));
    CHECK(adapt_sigma(0.3, 0.3, 1.0, 2.7) == 1.0);
    CHECK(adapt_sigma(0.05, 1.0, 1.0, 1.7) == doctest::Approx(1.0 / 1.7));
    AdmmState st;
    st.sigma = 3.0;
    st.residuals.push_back({1.0, 0.05});
    CHECK(adapt_sigma(st, 2.7) == doctest::Approx(8.1));
  }

  TEST_CASE("problem validation") {
    Eigen::MatrixXd R(2, 2);
    R << 0.1, 0.2, 0.3, std::nan("");
    CHECK_THROWS_AS(SaaProblem::make(R, 0.1, 0.3, kPoly2), Error);
    R(1, 1) = 0.0;
    CHECK_THROWS_AS(SaaProblem::make(R, 0.1, 1.5, kPoly2), Error);
    CHECK_THROWS_AS(SaaProblem::make(R, -0.1, 0.5, kPoly2), Error);
  }

  TEST_CASE("single asset examples") {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(4, 1);
    auto p = SaaProblem::make(R, 1.0, 0.0, LossFunction::exponential(1.0), 0.0);
    auto r = solve(p, tight());
    CHECK(r.report.converged);
    CHECK(r.state.w[0] == 1.0);
    CHECK(std::abs(r.state.t) <= 1e-6);
    CHECK(std::abs(r.report.objective) <= 1e-6);

    R.setConstant(0.1);
    p = SaaProblem::make(R, 1.0, 0.0, LossFunction::exponential(1.0), 0.0);
    r = solve(p, tight());
    CHECK(r.report.converged);
    CHECK(r.report.objective == doctest::Approx(-0.1).epsilon(1e-6));
  }

  TEST_CASE("two assets against the grid") {
    std::mt19937_64 g(7);
    for (const auto& l : {LossFunction::exponential(0.5), LossFunction::exponential(1.0),
                          LossFunction::piecewise_polynomial(2.0), LossFunction::piecewise_polynomial(3.0)}) {
      for (int k = 0; k < 3; ++k) {
        double alpha = 0.0;
        const auto p = tiny_problem(g, l, 0.1, alpha);
        const auto r = solve(p, tight());
        CHECK(r.report.converged);
        const double ref = oracle::grid_objective(p.R, p.lambda, alpha, p.R0, as_oracle(l));
        CHECK(std::abs(r.report.objective - ref) <= 1e-4);
        CHECK(r.report.violation <= 1e-5);
      }
    }
  }

  TEST_CASE("alpha 0 objective is the shortfall risk of the solution") {
    SyntheticSpec spec;
    spec.n = 5;
    spec.m = 200;
    spec.seed = 4;
    const auto tab = generate_synthetic(spec);
    const auto p = SaaProblem::make(tab.values, 0.1, 0.0, LossFunction::exponential(0.5));
    const auto r = solve(p);
    REQUIRE(r.report.converged);
    const Eigen::VectorXd x = p.R * r.state.w;
    const double t = oracle::ubsr(std::vector<double>(x.data(), x.data() + x.size()), 0.1, {true, 0.5});
    CHECK(r.report.objective == doctest::Approx(t).epsilon(1e-4));
  }

  TEST_CASE("synthetic run keeps iterates feasible and residuals shrink") {
    SyntheticSpec spec;
    spec.n = 20;
    spec.m = 500;
    spec.seed = 11;
    const auto tab = generate_synthetic(spec);
    const auto p = SaaProblem::make(tab.values, 0.1, 0.5, LossFunction::exponential(0.5));
    const auto r = solve(p);
    REQUIRE(r.report.converged);
    CHECK(r.report.violation <= 1e-5);
    CHECK(r.report.primal_residual <= r.report.primal_tolerance);
    CHECK(r.report.dual_residual <= r.report.dual_tolerance);
    CHECK(r.state.w.minCoeff() >= 0.0);
    CHECK(std::abs(r.state.w.sum() - 1.0) <= 1e-12);
    ProjectionInstance z{std::vector<double>(r.state.z.data(), r.state.z.data() + r.state.z.size()), 0.1,
                         LossFunction::exponential(0.5)};
    CHECK(membership_margin(z) >= -1e-8);
    // min-so-far primal residual halves between k and 4k, once sigma has left
    // its tiny starting value
    const auto& res = r.state.residuals;
    std::vector<double> best(res.size());
    double b = 1e300;
    for (std::size_t i = 0; i < res.size(); ++i) best[i] = b = std::min(b, res[i].primal);
    for (std::size_t k = 4; 4 * k < res.size(); ++k) CHECK(best[4 * k] <= 0.5 * best[k]);
  }

  TEST_CASE("utility with zero returns") {
    UtilityProblem p;
    p.R = Eigen::MatrixXd::Zero(3, 4);
    p.b = 10.0;
    p.lambda = 0.1;
    p.loss = LossFunction::exponential(1.0);
    const auto r = solve_utility_constrained(p, tight());
    CHECK(r.report.violation <= 1e-5);
    CHECK(std::abs(r.state.w.sum() - 1.0) <= 1e-12);
    CHECK(r.state.w.minCoeff() >= 0.0);
  }

  TEST_CASE("linear utility against the grid") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> N(0.0, 0.5);
    for (const auto& l : {LossFunction::exponential(1.0), LossFunction::piecewise_polynomial(3.0)}) {
      for (int k = 0; k < 3; ++k) {
        UtilityProblem p;
        p.R.resize(3, 2);
        for (Eigen::Index i = 0; i < 6; ++i) p.R.data()[i] = N(g);
        p.lambda = 0.1;
        p.loss = l;
        p.b = oracle::ubsr(oracle::portfolio(p.R, 0.5), 0.1, as_oracle(l)) + 0.05;
        const auto r = solve_utility_constrained(p, tight());
        CHECK(r.report.converged);
        const double ref = oracle::grid_utility_objective(p.R, 0.1, p.b, as_oracle(l));
        CHECK(std::abs(r.report.objective - ref) <= 1e-4);
      }
    }
  }

  TEST_CASE("exponential utility is concave and increasing") {
    Utility u{UtilityKind::Exponential, 2.0};
    CHECK(u.value(0.0) == 0.0);
    CHECK(u.deriv(0.0) == doctest::Approx(1.0));
    CHECK(u.value(1.0) < 1.0);
    CHECK(u.deriv(1.0) < u.deriv(0.0));
  }
}

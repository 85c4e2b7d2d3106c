#include "ubsr/kernels.hpp"

#include <omp.h>

#include <cmath>
#include <exception>
#include <limits>

namespace ubsr::kernels {

namespace {

Backend g_backend = Backend::Parallel;

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Exponential loss: with s = x - u the root solves
//   psi(s) = A - beta s - log(s) = 0,  A = log(c beta) + beta x,
// which never evaluates exp at large arguments. psi is convex and decreasing,
// so Newton from the left of the root is monotone.
CoordinateResult solve_exp(double beta, double x, double c, double& u, double tol, int max_iter) {
  const double A = std::log(c * beta) + beta * x;
  double s = x - u;
  if (!(s > 0.0) || !std::isfinite(s)) {
    if (A < 0.0) {
      s = std::exp(A);
    } else {
      const double r = A / beta;
      s = r > 1.0 ? r - std::log(r) / beta : std::max(r, std::exp(A - beta * r));
    }
  }
  if (!(s > 0.0) || x - s == x) {
    // Root is within one ulp of x.
    u = x;
    return {0, c * beta * std::exp(beta * x), true};
  }
  const double floor = 2.0 * kEps * (std::abs(x) + s);
  for (int it = 1; it <= max_iter; ++it) {
    const double psi = A - beta * s - std::log(s);
    const double res = s * std::abs(psi);
    if (res <= tol) {
      u = x - s;
      return {it - 1, res, true};
    }
    double next;
    if (psi < 0.0) {
      // Right of the root: jump left with the fixed-point map, then Newton.
      next = std::exp(A - beta * s);
      if (!(next > 0.0)) next = 0.5 * s;
      const double newton = s + psi * s / (beta * s + 1.0);
      if (newton > 0.0) next = std::max(next, newton);
    } else {
      next = s + psi * s / (beta * s + 1.0);
    }
    const double step = std::abs(next - s);
    s = next;
    if (step <= floor) {
      u = x - s;
      return {it, s * std::abs(A - beta * s - std::log(s)), true};
    }
  }
  u = x - s;
  return {max_iter, s * std::abs(A - beta * s - std::log(s)), false};
}

// Polynomial loss: g(u) = u - x + c u_+^(eta-1) is convex and increasing with
// g' >= 1; starting at or right of the root Newton decreases monotonically.
CoordinateResult solve_poly(const LossFunction& loss, double x, double c, double& u, double tol,
                            int max_iter) {
  if (!(u > 0.0 && u <= x)) u = x;
  const double floor = 2.0 * kEps * std::abs(x);
  double res = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const auto d = loss.derivs_unchecked(u);
    const double g = u - x + c * d.d1;
    res = std::abs(g);
    if (res <= tol) return {it, res, true};
    double next = u - g / (1.0 + c * d.d2);
    if (!(next > 0.0)) next = 0.5 * u;
    if (next > x) next = x;
    const double step = std::abs(next - u);
    u = next;
    if (step <= floor) return {it + 1, res, true};
  }
  return {max_iter, res, false};
}

}  // namespace

Backend default_backend() { return g_backend; }
void set_default_backend(Backend backend) { g_backend = backend; }

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

void run_blocks(Backend backend, std::size_t nblocks, const std::function<void(std::size_t)>& body) {
  if (nblocks == 0) return;
  if (backend == Backend::Serial || nblocks == 1) {
    for (std::size_t b = 0; b < nblocks; ++b) body(b);
    return;
  }
  std::vector<std::exception_ptr> errors(nblocks);
  const auto n = static_cast<std::ptrdiff_t>(nblocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    try {
      body(static_cast<std::size_t>(b));
    } catch (...) {
      errors[static_cast<std::size_t>(b)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double sum(std::span<const double> v, Backend backend) {
  return reduce<1>(backend, v.size(), [&](std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += v[i];
    return std::array<double, 1>{acc};
  })[0];
}

double dot(std::span<const double> a, std::span<const double> b, Backend backend) {
  return reduce<1>(backend, a.size(), [&](std::size_t lo, std::size_t hi) {
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += a[i] * b[i];
    return std::array<double, 1>{acc};
  })[0];
}

double max_abs(std::span<const double> v, Backend backend) {
  const std::size_t nb = block_count(v.size());
  std::vector<double> parts(nb, 0.0);
  run_blocks(backend, nb, [&](std::size_t b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(v.size(), lo + kBlockSize);
    double m = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      const double a = std::abs(v[i]);
      if (a > m || std::isnan(a)) m = a;
    }
    parts[b] = m;
  });
  double m = 0.0;
  for (double p : parts) {
    if (p > m || std::isnan(p)) m = p;
  }
  return m;
}

double sum_loss(const LossFunction& loss, std::span<const double> u, Backend backend) {
  return reduce<1>(backend, u.size(), [&](std::size_t b, std::size_t e) {
    CompensatedSum acc;
    for (std::size_t i = b; i < e; ++i) acc.add(loss.value(u[i]));
    return std::array<double, 1>{acc.value()};
  })[0];
}

double sum_loss_or_inf(const LossFunction& loss, std::span<const double> u, Backend backend) {
  return reduce<1>(backend, u.size(), [&](std::size_t b, std::size_t e) {
    CompensatedSum acc;
    for (std::size_t i = b; i < e; ++i) {
      if (loss.overflows(u[i])) return std::array<double, 1>{std::numeric_limits<double>::infinity()};
      acc.add(loss.value_unchecked(u[i]));
    }
    return std::array<double, 1>{acc.value()};
  })[0];
}

HTerms h_terms(const LossFunction& loss, std::span<const double> u, double rho, Backend backend) {
  const double m = static_cast<double>(u.size());
  const auto r = reduce<3>(backend, u.size(), [&](std::size_t b, std::size_t e) {
    CompensatedSum value;
    double slope = 0.0;
    double deriv = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      if (loss.overflows(u[i])) {
        throw Error(ErrorCode::Overflow, "exponential loss overflow in H evaluation");
      }
      const auto d = loss.derivs_unchecked(u[i]);
      value.add(d.value);
      slope += d.d1 * d.d1 / (m + rho * d.d2);
      deriv += d.d1;
    }
    return std::array<double, 3>{value.value(), slope, deriv};
  });
  return {r[0], r[1], r[2]};
}

CoordinateResult solve_coordinate(const LossFunction& loss, double x, double c, double& u, double tol,
                                  int max_iter) {
  if (!(c > 0.0) || x <= loss.flat_threshold()) {
    u = x;
    return {0, 0.0, true};
  }
  const double eff_tol = std::max(tol, 4.0 * kEps * std::abs(x));
  if (loss.kind() == LossKind::Exponential) {
    return solve_exp(loss.parameter(), x, c, u, eff_tol, max_iter);
  }
  return solve_poly(loss, x, c, u, eff_tol, max_iter);
}

GSolveStats solve_g(const LossFunction& loss, std::span<const double> x, double c, std::span<double> u,
                    double tol, int max_iter, Backend backend) {
  const std::size_t nb = block_count(x.size());
  std::vector<GSolveStats> parts(nb);
  run_blocks(backend, nb, [&](std::size_t b) {
    const std::size_t lo = b * kBlockSize;
    const std::size_t hi = std::min(x.size(), lo + kBlockSize);
    GSolveStats st;
    for (std::size_t i = lo; i < hi; ++i) {
      const auto r = solve_coordinate(loss, x[i], c, u[i], tol, max_iter);
      st.max_iterations = std::max(st.max_iterations, r.iterations);
      st.total_iterations += r.iterations;
      st.max_residual = std::max(st.max_residual, r.residual);
      st.converged = st.converged && r.converged;
      if (loss.overflows(u[i])) {
        throw Error(ErrorCode::Overflow, "projection coordinate beyond exponential range");
      }
    }
    parts[b] = st;
  });
  GSolveStats out;
  for (const auto& p : parts) {
    out.max_iterations = std::max(out.max_iterations, p.max_iterations);
    out.total_iterations += p.total_iterations;
    out.max_residual = std::max(out.max_residual, p.max_residual);
    out.converged = out.converged && p.converged;
  }
  return out;
}

void gemv(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, Eigen::VectorXd& out, Backend backend) {
  const std::size_t rows = static_cast<std::size_t>(a.rows());
  out.resize(a.rows());
  for_each_block(backend, rows, [&](std::size_t lo, std::size_t hi) {
    const auto len = static_cast<Eigen::Index>(hi - lo);
    const auto start = static_cast<Eigen::Index>(lo);
    auto seg = out.segment(start, len);
    seg.setZero();
    for (Eigen::Index j = 0; j < a.cols(); ++j) seg += w[j] * a.col(j).segment(start, len);
  });
}

void gemv_t(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, Eigen::VectorXd& out, Backend backend) {
  const auto cols = static_cast<std::size_t>(a.cols());
  out.resize(a.cols());
  const auto m = static_cast<std::size_t>(a.rows());
  constexpr std::size_t per = 4;
  const std::size_t nb = (cols + per - 1) / per;
  run_blocks(backend, nb, [&](std::size_t b) {
    const std::size_t lo = b * per;
    const std::size_t hi = std::min(cols, lo + per);
    for (std::size_t j = lo; j < hi; ++j) {
      const double* col = a.data() + j * m;
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc += col[i] * v[static_cast<Eigen::Index>(i)];
      out[static_cast<Eigen::Index>(j)] = acc;
    }
  });
}

}  // namespace ubsr::kernels

#pragma once

// Data-parallel building blocks shared by the solvers.
//
// Work is cut into fixed blocks of kBlockSize elements regardless of the thread
// count. Each block is reduced left to right and block partials are combined
// pairwise, so Serial and Parallel give bit-identical results. Serial is the
// reference path used by the tests and the benchmark.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ubsr/loss.hpp"

namespace ubsr::kernels {

enum class Backend { Serial, Parallel };

inline constexpr std::size_t kBlockSize = 1024;

Backend default_backend();
void set_default_backend(Backend backend);
// 0 leaves the OpenMP runtime default in place.
void set_num_threads(int threads);
int max_threads();

// Neumaier compensated accumulator, used inside blocks for loss sums.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + comp; }
};

inline std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

// Calls body(b) for every block index. Exceptions thrown by a block are
// caught inside the parallel region; the one from the lowest block is rethrown.
void run_blocks(Backend backend, std::size_t nblocks, const std::function<void(std::size_t)>& body);

template <std::size_t N>
std::array<double, N> pairwise_combine(std::vector<std::array<double, N>>& parts) {
  if (parts.empty()) return {};
  std::size_t len = parts.size();
  while (len > 1) {
    const std::size_t half = len / 2;
    for (std::size_t i = 0; i < half; ++i) {
      for (std::size_t k = 0; k < N; ++k) parts[i][k] = parts[2 * i][k] + parts[2 * i + 1][k];
    }
    if (len % 2 == 1) parts[half] = parts[len - 1];
    len = half + len % 2;
  }
  return parts[0];
}

// block_fn(begin, end) returns the N partial sums of one block.
template <std::size_t N, class BlockFn>
std::array<double, N> reduce(Backend backend, std::size_t n, BlockFn&& block_fn) {
  const std::size_t nb = block_count(n);
  std::vector<std::array<double, N>> parts(nb);
  run_blocks(backend, nb, [&](std::size_t b) {
    const std::size_t begin = b * kBlockSize;
    parts[b] = block_fn(begin, std::min(n, begin + kBlockSize));
  });
  return pairwise_combine<N>(parts);
}

// block_fn(begin, end) with no result.
template <class BlockFn>
void for_each_block(Backend backend, std::size_t n, BlockFn&& block_fn) {
  run_blocks(backend, block_count(n), [&](std::size_t b) {
    const std::size_t begin = b * kBlockSize;
    block_fn(begin, std::min(n, begin + kBlockSize));
  });
}

double sum(std::span<const double> v, Backend backend = default_backend());
double dot(std::span<const double> a, std::span<const double> b, Backend backend = default_backend());
double max_abs(std::span<const double> v, Backend backend = default_backend());

// sum_i l(u_i); throws Overflow.
double sum_loss(const LossFunction& loss, std::span<const double> u, Backend backend = default_backend());

// Same, but returns +inf instead of throwing when an entry overflows.
double sum_loss_or_inf(const LossFunction& loss, std::span<const double> u,
                       Backend backend = default_backend());

// Pieces of the complementarity map H(rho) = sum l(u) - m lambda and its
// derivative h(rho) = -sum l'(u)^2 / (m + rho l''(u)).
struct HTerms {
  double loss_sum = 0.0;
  double slope_sum = 0.0;  // sum l'(u)^2 / (m + rho l''(u))
  double deriv_sum = 0.0;  // sum l'(u)
};
HTerms h_terms(const LossFunction& loss, std::span<const double> u, double rho,
               Backend backend = default_backend());

struct GSolveStats {
  int max_iterations = 0;
  long total_iterations = 0;
  double max_residual = 0.0;
  bool converged = true;
};

struct CoordinateResult {
  int iterations;
  double residual;
  bool converged;
};

// Solves u - x + c l'(u) = 0 for one coordinate by safeguarded Newton; u holds
// the warm start on entry. The root never exceeds x. For exp the solve runs in
// log form so large x never reaches exp().
CoordinateResult solve_coordinate(const LossFunction& loss, double x, double c, double& u,
                                  double tol, int max_iter);

// Coordinate-wise solve of u - x + c l'(u) = 0 over all entries, warm-started
// from the contents of u. Throws Overflow if a root is beyond exp range.
GSolveStats solve_g(const LossFunction& loss, std::span<const double> x, double c, std::span<double> u,
                    double tol, int max_iter, Backend backend = default_backend());

// out = A w, blocked over rows.
void gemv(const Eigen::MatrixXd& a, const Eigen::VectorXd& w, Eigen::VectorXd& out,
          Backend backend = default_backend());
// out = A^T v, one column per task.
void gemv_t(const Eigen::MatrixXd& a, const Eigen::VectorXd& v, Eigen::VectorXd& out,
            Backend backend = default_backend());

}  // namespace ubsr::kernels

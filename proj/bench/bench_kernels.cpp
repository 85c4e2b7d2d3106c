// Serial vs OpenMP timings for the hot kernels and one full projection.
// Arg 0 selects the backend: 0 serial, 1 parallel.

#include <benchmark/benchmark.h>

#include <vector>

#include "ubsr/data.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

using namespace ubsr;

namespace {

kernels::Backend backend_of(const benchmark::State& st) {
  return st.range(0) == 0 ? kernels::Backend::Serial : kernels::Backend::Parallel;
}

std::vector<double> normals(std::size_t m, std::uint64_t seed) {
  NormalStream rng(seed);
  std::vector<double> x(m);
  for (auto& v : x) v = rng.next();
  return x;
}

void BM_SumLoss(benchmark::State& st) {
  const auto x = normals(static_cast<std::size_t>(st.range(1)), 1);
  const auto loss = LossFunction::exponential(0.5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::sum_loss(loss, x, backend_of(st)));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_SolveG(benchmark::State& st) {
  const auto x = normals(static_cast<std::size_t>(st.range(1)), 2);
  const auto loss = LossFunction::exponential(0.5);
  std::vector<double> u(x.size());
  for (auto _ : st) {
    u = x;
    benchmark::DoNotOptimize(kernels::solve_g(loss, x, 10.0, u, 1e-14, 200, backend_of(st)));
  }
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_HTerms(benchmark::State& st) {
  const auto u = normals(static_cast<std::size_t>(st.range(1)), 3);
  const auto loss = LossFunction::piecewise_polynomial(3.0);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::h_terms(loss, u, 5.0, backend_of(st)));
  st.SetItemsProcessed(st.iterations() * st.range(1));
}

void BM_Gemv(benchmark::State& st) {
  SyntheticSpec spec;
  spec.m = static_cast<std::size_t>(st.range(1));
  spec.n = 500;
  const Eigen::MatrixXd R = generate_synthetic(spec).values;
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(500, 1.0 / 500.0);
  Eigen::VectorXd out;
  for (auto _ : st) {
    kernels::gemv(R, w, out, backend_of(st));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_GemvT(benchmark::State& st) {
  SyntheticSpec spec;
  spec.m = static_cast<std::size_t>(st.range(1));
  spec.n = 500;
  const Eigen::MatrixXd R = generate_synthetic(spec).values;
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(R.rows());
  Eigen::VectorXd out;
  for (auto _ : st) {
    kernels::gemv_t(R, v, out, backend_of(st));
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_ProjectSepSsn(benchmark::State& st) {
  const ProjectionInstance inst{normals(static_cast<std::size_t>(st.range(1)), 4), 0.1, LossFunction::exponential(0.5)};
  const auto saved = kernels::default_backend();
  kernels::set_default_backend(backend_of(st));
  for (auto _ : st) benchmark::DoNotOptimize(project_sepssn(inst).rho);
  kernels::set_default_backend(saved);
}

}  // namespace

BENCHMARK(BM_SumLoss)->ArgsProduct({{0, 1}, {1 << 14, 1 << 20}});
BENCHMARK(BM_SolveG)->ArgsProduct({{0, 1}, {1 << 14, 1 << 20}});
BENCHMARK(BM_HTerms)->ArgsProduct({{0, 1}, {1 << 14, 1 << 20}});
BENCHMARK(BM_Gemv)->ArgsProduct({{0, 1}, {5000}});
BENCHMARK(BM_GemvT)->ArgsProduct({{0, 1}, {5000}});
BENCHMARK(BM_ProjectSepSsn)->ArgsProduct({{0, 1}, {100000}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

#include "ubsr/backtest.hpp"


#include <cmath>
#include <limits>

#include "ubsr/errors.hpp"

namespace ubsr {

void BacktestConfig::validate(std::size_t rows) const {
  if (window < 2) throw Error(ErrorCode::InvalidArgument, "window must be at least 2");
  if (rows <= window) throw Error(ErrorCode::InvalidArgument, "need more rows than the window");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0, 1)");
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be positive");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_failure_fraction must lie in [0, 1]");
  }
}

std::vector<double> cumulative_returns(const std::vector<double>& r) {
  std::vector<double> out(r.size());
  double wealth = 1.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    wealth *= 1.0 + r[i];
    out[i] = wealth - 1.0;
  }
  return out;
}

double max_drawdown(const std::vector<double>& r) {
  double wealth = 1.0;
  double peak = 1.0;
  double worst = 0.0;
  for (double x : r) {
    wealth *= 1.0 + x;
    if (wealth > peak) peak = wealth;
    worst = std::min(worst, wealth / peak - 1.0);
  }
  return worst;
}

SeriesMetrics series_metrics(const std::vector<double>& r) {
  SeriesMetrics s;
  if (r.empty()) return s;
  const double T = static_cast<double>(r.size());
  double sum = 0.0;
  for (double x : r) sum += x;
  s.mean_return = sum / T;
  double ss = 0.0;
  for (double x : r) ss += (x - s.mean_return) * (x - s.mean_return);
  s.volatility = std::sqrt(ss / T);
  // spread at the rounding level of the mean is a constant series
  double big = 0.0;
  for (double x : r) big = std::max(big, std::abs(x));
  if (s.volatility <= 16.0 * std::numeric_limits<double>::epsilon() * big) s.volatility = 0.0;
  if (s.volatility > 0.0) s.sharpe = s.mean_return / s.volatility;
  s.max_drawdown = max_drawdown(r);
  return s;
}

BacktestReport run_backtest(const ReturnsTable& table, const BacktestConfig& cfg) {
  const auto rows = static_cast<std::size_t>(table.values.rows());
  cfg.validate(rows);
  const Eigen::Index n = table.values.cols();
  const Eigen::VectorXd ew = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const double full_mean = table.values.mean();
  const std::size_t days = rows - cfg.window;
  const auto allowed = static_cast<std::size_t>(std::floor(cfg.max_failure_fraction * static_cast<double>(days)));

  BacktestReport rep;
  for (std::size_t d = cfg.window; d < rows; ++d) {
    const auto di = static_cast<Eigen::Index>(d);
    const Eigen::VectorXd today = table.values.row(di).transpose();
    rep.benchmark_returns.push_back(today.dot(ew));

    DayDiagnostics diag;
    diag.row = d;
    try {
      Eigen::MatrixXd R = table.values.middleRows(di - static_cast<Eigen::Index>(cfg.window),
                                                  static_cast<Eigen::Index>(cfg.window));
      std::optional<double> r0;
      if (cfg.r0_rule == R0Rule::Fixed) r0 = cfg.r0_fixed;
      if (cfg.r0_rule == R0Rule::FullSampleMean) r0 = full_mean;
      const SaaProblem p = SaaProblem::make(std::move(R), cfg.lambda, cfg.alpha, cfg.loss, r0);
      const SolveResult res = solve(p, cfg.admm);
      diag.iterations = res.report.iterations;
      diag.violation = res.report.violation;
      diag.objective = res.report.objective;
      diag.wall_time = res.report.wall_time;
      diag.solved = res.report.converged;
      if (diag.solved) {
        rep.daily_oos_returns.push_back(today.dot(res.state.w));
        rep.held_rows.push_back(d);
      } else {
        diag.error = "ADMM did not converge";
      }
    } catch (const Error& e) {
      diag.error = std::string(to_string(e.code())) + ": " + e.what();
    }
    if (!diag.solved && ++rep.failures > allowed) {
      throw Error(ErrorCode::TooManyFailures, "more than " + std::to_string(allowed) + " of " + std::to_string(days) +
                                                  " backtest days failed");
    }
    rep.days.push_back(std::move(diag));
  }
  rep.cumulative = cumulative_returns(rep.daily_oos_returns);
  rep.metrics = series_metrics(rep.daily_oos_returns);
  rep.benchmark_cumulative = cumulative_returns(rep.benchmark_returns);
  rep.benchmark_metrics = series_metrics(rep.benchmark_returns);
  return rep;
}

}  // namespace ubsr

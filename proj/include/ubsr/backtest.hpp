#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ubsr/admm.hpp"
#include "ubsr/data.hpp"

namespace ubsr {

enum class R0Rule { OneOverN, Fixed, FullSampleMean };

struct BacktestConfig {
  std::size_t window = 250;
  double alpha = 0.3;
  double lambda = 0.1;
  LossFunction loss = LossFunction::exponential(1.0);
  R0Rule r0_rule = R0Rule::OneOverN;
  double r0_fixed = 0.0;
  double max_failure_fraction = 0.05;
  AdmmOptions admm;
  void validate(std::size_t rows) const;
};

struct DayDiagnostics {
  std::size_t row = 0;  // table row that was held
  bool solved = false;
  int iterations = 0;
  double violation = 0.0;
  double objective = 0.0;
  double wall_time = 0.0;
  std::string error;  // empty when the solve ran to convergence
};

struct SeriesMetrics {
  double mean_return = 0.0;
  std::optional<double> sharpe;  // empty when volatility is 0
  double volatility = 0.0;       // population standard deviation
  double max_drawdown = 0.0;
};

struct BacktestReport {
  std::vector<double> daily_oos_returns;
  std::vector<double> cumulative;
  std::vector<std::size_t> held_rows;
  SeriesMetrics metrics;
  std::vector<double> benchmark_returns;  // equal weights on every evaluation day
  std::vector<double> benchmark_cumulative;
  SeriesMetrics benchmark_metrics;
  std::vector<DayDiagnostics> days;
  std::size_t failures = 0;
};

// min over days of wealth / running peak - 1, with initial wealth 1 counted as a peak.
double max_drawdown(const std::vector<double>& returns);
std::vector<double> cumulative_returns(const std::vector<double>& returns);
SeriesMetrics series_metrics(const std::vector<double>& returns);

// Throws TooManyFailures when more than max_failure_fraction of the days fail.
BacktestReport run_backtest(const ReturnsTable& table, const BacktestConfig& cfg);

}  // namespace ubsr

// ubsr command line: estimate, project, optimize, backtest, gen-data, bench.
// Exit codes: 0 ok, 1 solver did not converge, 2 usage or config error, 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ubsr/admm.hpp"
#include "ubsr/backtest.hpp"
#include "ubsr/config.hpp"
#include "ubsr/data.hpp"
#include "ubsr/estimate.hpp"
#include "ubsr/kernels.hpp"
#include "ubsr/projection.hpp"

using json = nlohmann::ordered_json;
using namespace ubsr;

namespace {

constexpr int kSchemaVersion = 1;
constexpr std::size_t kInlineLimit = 1000;  // larger vectors go to a CSV next to the report

enum Exit { kOk = 0, kNoConvergence = 1, kUsage = 2, kIo = 3 };

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 0;
  int threads = 0;
  std::string log_level = "warn";
  bool no_timings = false;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

json timing(const Globals& g, double t) { return g.no_timings ? json(nullptr) : json(t); }

void log(const Globals& g, const std::string& level, const std::string& msg) {
  static const char* order[] = {"error", "warn", "info", "debug"};
  auto rank = [](const std::string& l) {
    for (int i = 0; i < 4; ++i) {
      if (l == order[i]) return i;
    }
    return 1;
  };
  if (rank(level) <= rank(g.log_level)) std::cerr << "[" << level << "] " << msg << "\n";
}

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + out);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for " + out);
}

LossFunction make_loss(const std::string& name, double param) {
  if (name == "exp" || name == "exponential") return LossFunction::exponential(param);
  if (name == "poly" || name == "polynomial") return LossFunction::piecewise_polynomial(param);
  throw Usage("unknown loss '" + name + "' (use exp or poly)");
}

// "exp:0.5" or "poly:3"
LossFunction parse_loss_spec(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw Usage("loss spec '" + spec + "' must look like exp:0.5 or poly:2");
  double v = 0.0;
  try {
    v = std::stod(spec.substr(colon + 1));
  } catch (const std::exception&) {
    throw Usage("bad loss parameter in '" + spec + "'");
  }
  return make_loss(spec.substr(0, colon), v);
}

json loss_json(const LossFunction& l) {
  json j;
  j["kind"] = l.kind() == LossKind::Exponential ? "exp" : "poly";
  j[l.kind() == LossKind::Exponential ? "beta" : "eta"] = l.parameter();
  return j;
}

std::string sibling_path(const std::string& out, const std::string& suffix) {
  if (out.empty() || out == "-") return suffix;
  const auto dot = out.rfind('.');
  const auto slash = out.rfind('/');
  const std::string stem = dot != std::string::npos && (slash == std::string::npos || dot > slash) ? out.substr(0, dot) : out;
  return stem + "." + suffix;
}

json vector_or_path(const std::vector<double>& v, const std::string& out, const std::string& suffix,
                    const std::string& header, const std::string& explicit_path) {
  if (explicit_path.empty() && v.size() <= kInlineLimit) return v;
  const std::string path = explicit_path.empty() ? sibling_path(out, suffix) : explicit_path;
  write_vector_csv(v, path, header);
  return path;
}

// Options shared by the config-driven subcommands; unset flags leave config values alone.
struct ProblemFlags {
  std::string config;
  std::string input;
  std::string loss;
  double param = 0.0;
  double lambda = 0.0;
  double alpha = 0.0;
  std::string r0;
  double sigma0 = 0.0;
  double tau = 0.0;
  double tol_abs = 0.0;
  double tol_rel = 0.0;
  int max_iter = 0;
  std::string projector;
  double outlier_cutoff = 0.0;
  std::string out;
};

struct ProblemSetup {
  std::string input;
  LossFunction loss = LossFunction::exponential(1.0);
  double lambda = 0.1;
  double alpha = 0.0;
  std::optional<double> r0;  // empty: equal-weight rule
  AdmmOptions admm;
  IngestPolicy ingest;
  std::string out;
};

const std::map<std::string, std::set<std::string>> kOptimizeKeys = {
    {"", {}},
    {"problem", {"input", "loss", "beta", "eta", "lambda", "alpha", "R0", "outlier_cutoff"}},
    {"admm", {"sigma0", "tau", "tol_abs", "tol_rel", "max_iter", "inner_tol", "inner_max_iter", "projector"}},
    {"output", {"out", "weights", "series"}},
    {"run", {"seed", "threads"}},
    {"backtest", {"window", "r0_rule", "r0", "max_failure_fraction"}},
};

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Usage(std::string(what) + " must be positive");
}

ProblemSetup load_setup(const ProblemFlags& f, CLI::App& sub, Globals& g, Config& cfg) {
  ProblemSetup s;
  if (!f.config.empty()) {
    try {
      cfg = Config::load(f.config);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Io) throw;
      throw Usage(e.what());
    }
    try {
      cfg.reject_unknown(kOptimizeKeys);
    } catch (const Error& e) {
      throw Usage(e.what());
    }
  }
  auto given = [&](const char* flag) { return sub.count(flag) > 0; };
  try {
    if (auto v = cfg.string("problem", "input")) s.input = *v;
    std::string loss_name = cfg.string("problem", "loss").value_or("exp");
    double param = 0.0;
    if (loss_name == "exp" || loss_name == "exponential") {
      param = cfg.number("problem", "beta").value_or(1.0);
    } else {
      param = cfg.number("problem", "eta").value_or(2.0);
    }
    if (given("--loss")) loss_name = f.loss;
    if (given("--param")) param = f.param;
    s.loss = make_loss(loss_name, param);
    s.lambda = cfg.number("problem", "lambda").value_or(0.1);
    s.alpha = cfg.number("problem", "alpha").value_or(0.0);
    if (cfg.has("problem", "R0")) {
      std::optional<double> v;
      try {
        v = cfg.number("problem", "R0");
      } catch (const Error&) {
        if (cfg.string("problem", "R0") != "auto") throw Usage("problem.R0 must be a number or \"auto\"");
      }
      s.r0 = v;
    }
    s.ingest.outlier_zscore_cutoff = cfg.number("problem", "outlier_cutoff").value_or(10.0);
    s.admm.sigma0 = cfg.number("admm", "sigma0").value_or(s.admm.sigma0);
    s.admm.tau = cfg.number("admm", "tau").value_or(s.admm.tau);
    s.admm.tol_abs = cfg.number("admm", "tol_abs").value_or(s.admm.tol_abs);
    s.admm.tol_rel = cfg.number("admm", "tol_rel").value_or(s.admm.tol_rel);
    s.admm.max_iter = static_cast<int>(cfg.number("admm", "max_iter").value_or(s.admm.max_iter));
    s.admm.inner_tol = cfg.number("admm", "inner_tol").value_or(s.admm.inner_tol);
    s.admm.inner_max_iter = static_cast<int>(cfg.number("admm", "inner_max_iter").value_or(s.admm.inner_max_iter));
    if (auto p = cfg.string("admm", "projector")) s.admm.projector = projection_solver_from_string(*p);
    s.out = cfg.string("output", "out").value_or("");
    if (auto v = cfg.number("run", "seed")) g.seed = static_cast<std::uint64_t>(*v);
    if (auto v = cfg.number("run", "threads")) g.threads = static_cast<int>(*v);
  } catch (const Error& e) {
    throw Usage(e.what());
  }
  if (given("--input")) s.input = f.input;
  if (given("--lambda")) s.lambda = f.lambda;
  if (given("--alpha")) s.alpha = f.alpha;
  if (given("--R0")) {
    if (f.r0 == "auto") {
      s.r0.reset();
    } else {
      try {
        s.r0 = std::stod(f.r0);
      } catch (const std::exception&) {
        throw Usage("--R0 must be a number or auto");
      }
    }
  }
  if (given("--sigma0")) s.admm.sigma0 = f.sigma0;
  if (given("--tau")) s.admm.tau = f.tau;
  if (given("--tol-abs")) s.admm.tol_abs = f.tol_abs;
  if (given("--tol-rel")) s.admm.tol_rel = f.tol_rel;
  if (given("--max-iter")) s.admm.max_iter = f.max_iter;
  if (given("--projector")) {
    try {
      s.admm.projector = projection_solver_from_string(f.projector);
    } catch (const Error& e) {
      throw Usage(e.what());
    }
  }
  if (given("--outlier-cutoff")) s.ingest.outlier_zscore_cutoff = f.outlier_cutoff;
  if (given("--out")) s.out = f.out;

  if (s.input.empty()) throw Usage("an input CSV is required (--input or problem.input)");
  require_positive(s.lambda, "lambda");
  require_positive(s.admm.sigma0, "sigma0");
  require_positive(s.admm.tol_abs, "tol_abs");
  if (!(s.admm.tol_rel >= 0.0)) throw Usage("tol_rel must be nonnegative");
  require_positive(s.admm.inner_tol, "inner_tol");
  require_positive(s.ingest.outlier_zscore_cutoff, "outlier_cutoff");
  if (!(s.admm.tau > 1.0)) throw Usage("tau must exceed 1");
  if (s.admm.max_iter < 1 || s.admm.inner_max_iter < 1) throw Usage("iteration limits must be at least 1");
  if (!(s.alpha >= 0.0 && s.alpha < 1.0)) throw Usage("alpha must lie in [0, 1)");
  return s;
}

void add_problem_flags(CLI::App* sub, ProblemFlags& f) {
  sub->add_option("--config", f.config, "TOML-like config file");
  sub->add_option("--input", f.input, "returns CSV (header row, one row per date)");
  sub->add_option("--loss", f.loss, "exp or poly");
  sub->add_option("--param", f.param, "beta for exp, eta for poly");
  sub->add_option("--lambda", f.lambda, "risk level");
  sub->add_option("--alpha", f.alpha, "trade-off in [0,1)");
  sub->add_option("--R0", f.r0, "minimum return, or auto for the 1/n rule");
  sub->add_option("--sigma0", f.sigma0, "initial penalty");
  sub->add_option("--tau", f.tau, "penalty scaling factor");
  sub->add_option("--tol-abs", f.tol_abs, "absolute residual tolerance");
  sub->add_option("--tol-rel", f.tol_rel, "relative residual tolerance");
  sub->add_option("--max-iter", f.max_iter, "ADMM iteration limit");
  sub->add_option("--projector", f.projector, "z-step solver: dirssn|sepssn|bisect|ipm");
  sub->add_option("--outlier-cutoff", f.outlier_cutoff, "z-score cutoff for CSV cleaning");
  sub->add_option("--out", f.out, "JSON report path (default stdout)");
}

void apply_threads(const Globals& g) {
  if (g.threads < 0) throw Usage("--threads must be >= 0");
  if (g.threads > 0) kernels::set_num_threads(g.threads);
}

json report_json(const SolveReport& r, const Globals& g) {
  json j;
  j["objective"] = r.objective;
  j["violation"] = r.violation;
  j["iterations"] = r.iterations;
  j["wall_time"] = timing(g, r.wall_time);
  j["converged"] = r.converged;
  j["inexact_inner"] = r.inexact_inner;
  j["primal_residual"] = r.primal_residual;
  j["dual_residual"] = r.dual_residual;
  return j;
}

json metrics_json(const SeriesMetrics& m) {
  json j;
  j["mean_return"] = m.mean_return;
  j["sharpe"] = m.sharpe ? json(*m.sharpe) : json(nullptr);
  j["volatility"] = m.volatility;
  j["max_drawdown"] = m.max_drawdown;
  return j;
}

// ---- subcommands ----

struct EstimateArgs {
  std::string input, loss = "exp", out;
  double param = 1.0, lambda = 0.1, tol = 1e-10;
};

int run_estimate(const EstimateArgs& a, const Globals& g) {
  require_positive(a.tol, "tol");
  require_positive(a.lambda, "lambda");
  const LossFunction loss = make_loss(a.loss, a.param);
  const auto samples = read_vector_csv(a.input);
  const auto t0 = Clock::now();
  const UbsrEstimate e = estimate_ubsr(samples, a.lambda, loss, a.tol);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["loss"] = loss_json(loss);
  j["lambda"] = a.lambda;
  j["m"] = samples.size();
  j["t"] = e.t;
  j["residual"] = e.residual;
  j["iterations"] = e.iterations;
  j["wall_time"] = timing(g, seconds_since(t0));
  emit(j, a.out);
  return kOk;
}

struct ProjectArgs {
  std::string solver = "sepssn", input, loss = "exp", out, u_out;
  double param = 1.0, lambda = 0.1;
};

int run_project(const ProjectArgs& a, const Globals& g) {
  ProjectionSolver solver;
  try {
    solver = projection_solver_from_string(a.solver);
  } catch (const Error& e) {
    throw Usage(e.what());
  }
  ProjectionInstance inst{read_vector_csv(a.input), a.lambda, make_loss(a.loss, a.param)};
  const auto t0 = Clock::now();
  const ProjectionResult r = project(inst, solver);
  const double wall = seconds_since(t0);
  const KktCertificate c = kkt_certificate(inst, r.u, r.rho);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["solver"] = to_string(solver);
  j["loss"] = loss_json(inst.loss);
  j["lambda"] = a.lambda;
  j["m"] = inst.x.size();
  j["rho"] = r.rho;
  j["kkt_residual"] = r.kkt_residual;
  j["kkt"] = {{"stationarity", c.stationarity},
              {"feasibility", c.feasibility},
              {"complementarity", c.complementarity},
              {"dual_sign", c.dual_sign}};
  j["interior"] = r.interior;
  j["iterations"] = {{"outer", r.iterations.outer}, {"inner", r.iterations.inner}, {"backtracks", r.iterations.backtracks}};
  j["wall_time"] = timing(g, wall);
  j["u"] = vector_or_path(r.u, a.out, "u.csv", "u", a.u_out);
  emit(j, a.out);
  return kOk;
}

int run_optimize(const ProblemFlags& f, const std::string& weights_out, CLI::App& sub, Globals& g) {
  Config cfg;
  ProblemSetup s = load_setup(f, sub, g, cfg);
  apply_threads(g);
  std::string wpath = cfg.string("output", "weights").value_or("");
  if (sub.count("--weights")) wpath = weights_out;
  const ReturnsTable table = ingest_csv(s.input, s.ingest);
  for (const auto& w : table.warnings) log(g, "warn", w);
  const SaaProblem p = SaaProblem::make(table.values, s.lambda, s.alpha, s.loss, s.r0);
  for (const auto& w : p.warnings) log(g, "warn", w);
  const SolveResult res = solve(p, s.admm);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["m"] = p.m();
  j["n"] = p.n();
  j["loss"] = loss_json(p.loss);
  j["lambda"] = p.lambda;
  j["alpha"] = p.alpha;
  j["R0"] = p.R0;
  const json rj = report_json(res.report, g);
  for (const auto& [k, v] : rj.items()) j[k] = v;
  j["t"] = res.state.t;
  j["sigma"] = res.state.sigma;
  std::vector<double> w(res.state.w.data(), res.state.w.data() + res.state.w.size());
  if (wpath.empty()) wpath = sibling_path(s.out, "weights.csv");
  write_vector_csv(w, wpath, "w");
  j["w"] = wpath;
  emit(j, s.out);
  return res.report.converged ? kOk : kNoConvergence;
}

int run_backtest_cmd(const ProblemFlags& f, const std::string& series_out, std::size_t window_flag,
                     CLI::App& sub, Globals& g) {
  Config cfg;
  ProblemSetup s = load_setup(f, sub, g, cfg);
  apply_threads(g);
  BacktestConfig bc;
  bc.loss = s.loss;
  bc.lambda = s.lambda;
  bc.alpha = sub.count("--alpha") || cfg.has("problem", "alpha") ? s.alpha : 0.3;
  bc.admm = s.admm;
  try {
    bc.window = static_cast<std::size_t>(cfg.number("backtest", "window").value_or(250.0));
    const std::string rule = cfg.string("backtest", "r0_rule").value_or("one_over_n");
    if (rule == "one_over_n") {
      bc.r0_rule = R0Rule::OneOverN;
    } else if (rule == "fixed") {
      bc.r0_rule = R0Rule::Fixed;
      const auto v = cfg.number("backtest", "r0");
      if (!v) throw Usage("backtest.r0 is required when r0_rule = \"fixed\"");
      bc.r0_fixed = *v;
    } else if (rule == "full_sample_mean") {
      bc.r0_rule = R0Rule::FullSampleMean;
    } else {
      throw Usage("backtest.r0_rule must be one_over_n, fixed or full_sample_mean");
    }
    bc.max_failure_fraction = cfg.number("backtest", "max_failure_fraction").value_or(0.05);
  } catch (const Error& e) {
    throw Usage(e.what());
  }
  if (s.r0 && !cfg.has("backtest", "r0_rule")) {
    bc.r0_rule = R0Rule::Fixed;
    bc.r0_fixed = *s.r0;
  }
  if (sub.count("--window")) bc.window = window_flag;
  std::string spath = cfg.string("output", "series").value_or("");
  if (sub.count("--series")) spath = series_out;

  const ReturnsTable table = ingest_csv(s.input, s.ingest);
  for (const auto& w : table.warnings) log(g, "warn", w);
  try {
    bc.validate(static_cast<std::size_t>(table.values.rows()));
  } catch (const Error& e) {
    throw Usage(e.what());
  }
  const auto t0 = Clock::now();
  const BacktestReport rep = run_backtest(table, bc);
  const double wall = seconds_since(t0);

  json j;
  j["schema_version"] = kSchemaVersion;
  j["window"] = bc.window;
  j["loss"] = loss_json(bc.loss);
  j["lambda"] = bc.lambda;
  j["alpha"] = bc.alpha;
  j["days"] = rep.days.size();
  j["failures"] = rep.failures;
  j["metrics"] = metrics_json(rep.metrics);
  j["benchmark"] = metrics_json(rep.benchmark_metrics);
  j["daily_oos_returns"] = rep.daily_oos_returns;
  j["cumulative"] = rep.cumulative;
  json diag = json::array();
  for (const auto& d : rep.days) {
    json e;
    e["row"] = d.row;
    e["solved"] = d.solved;
    e["iterations"] = d.iterations;
    e["violation"] = d.violation;
    e["objective"] = d.objective;
    e["wall_time"] = timing(g, d.wall_time);
    if (!d.error.empty()) e["error"] = d.error;
    diag.push_back(e);
  }
  j["per_day"] = diag;
  j["wall_time"] = timing(g, wall);
  if (!spath.empty()) {
    std::ostringstream csv;
    csv << "row,ubsr_return,ubsr_cumulative,equal_weight_return,equal_weight_cumulative\n";
    std::size_t k = 0;
    char buf[160];
    for (std::size_t i = 0; i < rep.days.size(); ++i) {
      const bool held = k < rep.held_rows.size() && rep.held_rows[k] == rep.days[i].row;
      if (held) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g\n", rep.days[i].row, rep.daily_oos_returns[k],
                      rep.cumulative[k], rep.benchmark_returns[i], rep.benchmark_cumulative[i]);
        ++k;
      } else {
        std::snprintf(buf, sizeof buf, "%zu,,,%.17g,%.17g\n", rep.days[i].row, rep.benchmark_returns[i],
                      rep.benchmark_cumulative[i]);
      }
      csv << buf;
    }
    std::ofstream fs(spath, std::ios::binary);
    if (!fs) throw Error(ErrorCode::Io, "cannot write " + spath);
    fs << csv.str();
    j["series"] = spath;
  }
  emit(j, s.out);
  return kOk;
}

struct GenArgs {
  std::size_t n = 10, m = 100;
  double corr = 0.35;
  std::string out;
};

int run_gen(const GenArgs& a, const Globals& g) {
  SyntheticSpec spec;
  spec.n = a.n;
  spec.m = a.m;
  spec.seed = g.seed;
  spec.corr_coef = a.corr;
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Usage(e.what());
  }
  const ReturnsTable t = generate_synthetic(spec);
  for (const auto& w : t.warnings) log(g, "warn", w);
  if (a.out.empty() || a.out == "-") {
    std::cout << to_csv(t);
  } else {
    write_csv(t, a.out);
  }
  return kOk;
}

struct BenchArgs {
  std::string mode = "projection";
  std::vector<std::size_t> dims{1000, 10000, 100000};
  std::vector<std::string> solvers{"sepssn"};
  std::vector<std::string> losses{"exp:0.5"};
  std::vector<double> lambdas{0.1};
  std::vector<std::size_t> ns{100};
  std::vector<double> alphas{0.5};
  int repeats = 5;
  std::string out;
};

std::uint64_t cell_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  // splitmix-style mixing so instances depend on (m, repeat) but not on the solver
  std::uint64_t x = base ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xBF58476D1CE4E5B9ULL);
  x ^= x >> 31;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 29;
  return x;
}

std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_bench(const BenchArgs& a, const Globals& g) {
  if (a.repeats < 1) throw Usage("--repeats must be at least 1");
  std::vector<LossFunction> losses;
  for (const auto& s : a.losses) losses.push_back(parse_loss_spec(s));
  if (losses.empty() || a.lambdas.empty()) throw Usage("loss and lambda lists must be non-empty");
  for (double l : a.lambdas) require_positive(l, "lambda");
  std::ostringstream csv;
  if (a.mode == "projection") {
    if (a.solvers.empty()) throw Usage("solver list is empty");
    if (a.dims.empty()) throw Usage("dims list is empty");
    std::vector<ProjectionSolver> solvers;
    for (const auto& s : a.solvers) {
      try {
        solvers.push_back(projection_solver_from_string(s));
      } catch (const Error& e) {
        throw Usage(e.what());
      }
    }
    csv << "m,solver,loss,param,lambda,seed,wall_time,kkt_residual,rho,outer_iterations,inner_iterations,x0,u0,error\n";
    for (std::size_t m : a.dims) {
      if (m < 1) throw Usage("dims must be positive");
      for (const auto& loss : losses) {
        for (double lambda : a.lambdas) {
          for (int r = 0; r < a.repeats; ++r) {
            const std::uint64_t seed = cell_seed(g.seed, m, static_cast<std::uint64_t>(r));
            NormalStream rng(seed);
            ProjectionInstance inst{std::vector<double>(m), lambda, loss};
            for (auto& v : inst.x) v = rng.next();
            for (ProjectionSolver s : solvers) {
              csv << m << ',' << to_string(s) << ',' << (loss.kind() == LossKind::Exponential ? "exp" : "poly") << ','
                  << csv_num(loss.parameter()) << ',' << csv_num(lambda) << ',' << seed << ',';
              try {
                const auto t0 = Clock::now();
                const ProjectionResult pr = project(inst, s);
                const double wall = seconds_since(t0);
                csv << (g.no_timings ? std::string() : csv_num(wall)) << ',' << csv_num(pr.kkt_residual) << ','
                    << csv_num(pr.rho) << ',' << pr.iterations.outer << ',' << pr.iterations.inner << ','
                    << csv_num(inst.x[0]) << ',' << csv_num(pr.u[0]) << ",\n";
              } catch (const Error& e) {
                csv << ",,,,," << csv_num(inst.x[0]) << ",," << to_string(e.code()) << "\n";
              }
            }
          }
        }
      }
    }
  } else if (a.mode == "optimize") {
    if (a.dims.empty() || a.ns.empty() || a.alphas.empty()) throw Usage("m, n and alpha lists must be non-empty");
    csv << "m,n,alpha,loss,param,lambda,repeats,mean_objective,mean_time,max_violation,converged_runs,errors\n";
    for (std::size_t m : a.dims) {
      for (std::size_t n : a.ns) {
        for (double alpha : a.alphas) {
          if (!(alpha >= 0.0 && alpha < 1.0)) throw Usage("alpha must lie in [0, 1)");
          for (const auto& loss : losses) {
            for (double lambda : a.lambdas) {
              double obj = 0.0, time = 0.0, viol = 0.0;
              int conv = 0, ok = 0, errors = 0;
              for (int r = 0; r < a.repeats; ++r) {
                SyntheticSpec spec;
                spec.n = n;
                spec.m = m;
                spec.seed = cell_seed(g.seed, m * 1000003ULL + n, static_cast<std::uint64_t>(r));
                try {
                  const ReturnsTable t = generate_synthetic(spec);
                  const SaaProblem p = SaaProblem::make(t.values, lambda, alpha, loss);
                  const SolveResult res = solve(p, AdmmOptions{});
                  obj += res.report.objective;
                  time += res.report.wall_time;
                  viol = std::max(viol, res.report.violation);
                  conv += res.report.converged ? 1 : 0;
                  ++ok;
                } catch (const Error&) {
                  ++errors;
                }
              }
              const double k = ok ? static_cast<double>(ok) : 1.0;
              csv << m << ',' << n << ',' << csv_num(alpha) << ','
                  << (loss.kind() == LossKind::Exponential ? "exp" : "poly") << ',' << csv_num(loss.parameter()) << ','
                  << csv_num(lambda) << ',' << a.repeats << ',' << (ok ? csv_num(obj / k) : "") << ','
                  << (g.no_timings || !ok ? std::string() : csv_num(time / k)) << ',' << (ok ? csv_num(viol) : "")
                  << ',' << conv << ',' << errors << "\n";
            }
          }
        }
      }
    }
  } else {
    throw Usage("--mode must be projection or optimize");
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << csv.str();
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + a.out);
    f << csv.str();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shortfall-risk estimation, projection and portfolio optimization"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  Globals g;
  app.add_option("--seed", g.seed, "seed for every random draw");
  app.add_option("--threads", g.threads, "OpenMP threads for the kernels (0 keeps the default)");
  app.add_option("--log-level", g.log_level, "error|warn|info|debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_flag("--no-timings", g.no_timings, "write null for wall times so outputs are reproducible");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate the shortfall risk of a sample");
  est->add_option("--input", ea.input, "samples CSV, one value per line")->required();
  est->add_option("--loss", ea.loss, "exp or poly");
  est->add_option("--param", ea.param, "beta for exp, eta for poly");
  est->add_option("--lambda", ea.lambda, "risk level");
  est->add_option("--tol", ea.tol, "residual tolerance");
  est->add_option("--out", ea.out, "JSON output path (default stdout)");

  ProjectArgs pa;
  auto* prj = app.add_subcommand("project", "project a vector onto the risk sublevel set");
  prj->add_option("--solver", pa.solver, "dirssn|sepssn|bisect|ipm");
  prj->add_option("--input", pa.input, "vector CSV, one value per line")->required();
  prj->add_option("--loss", pa.loss, "exp or poly");
  prj->add_option("--param", pa.param, "beta for exp, eta for poly");
  prj->add_option("--lambda", pa.lambda, "risk level");
  prj->add_option("--out", pa.out, "JSON output path (default stdout)");
  prj->add_option("--u-out", pa.u_out, "CSV path for u (default: inline when m <= 1000)");

  ProblemFlags of;
  std::string weights_out;
  auto* opt = app.add_subcommand("optimize", "solve the sample portfolio problem with ADMM");
  add_problem_flags(opt, of);
  opt->add_option("--weights", weights_out, "CSV path for the optimal weights");

  ProblemFlags bf;
  std::string series_out;
  std::size_t window = 250;
  auto* bt = app.add_subcommand("backtest", "rolling-window out-of-sample evaluation");
  add_problem_flags(bt, bf);
  bt->add_option("--series", series_out, "CSV of daily and cumulative returns");
  bt->add_option("--window", window, "estimation window in rows");

  GenArgs ga;
  auto* gen = app.add_subcommand("gen-data", "generate synthetic returns");
  gen->add_option("--n", ga.n, "assets")->required();
  gen->add_option("--m", ga.m, "samples")->required();
  gen->add_option("--corr", ga.corr, "correlation coefficient");
  gen->add_option("--out", ga.out, "CSV path (default stdout)");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "timing grids for projection or optimization");
  bench->add_option("--mode", ba.mode, "projection or optimize");
  bench->add_option("--dims,--m", ba.dims, "problem sizes m")->delimiter(',');
  bench->add_option("--solvers", ba.solvers, "projection solvers")->delimiter(',')->expected(0, -1);
  bench->add_option("--losses", ba.losses, "loss specs such as exp:0.5,poly:2")->delimiter(',');
  bench->add_option("--lambdas", ba.lambdas, "risk levels")->delimiter(',');
  bench->add_option("--n", ba.ns, "asset counts (optimize mode)")->delimiter(',');
  bench->add_option("--alphas", ba.alphas, "trade-offs (optimize mode)")->delimiter(',');
  bench->add_option("--repeats", ba.repeats, "seeds per cell");
  bench->add_option("--out", ba.out, "CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*est) return apply_threads(g), run_estimate(ea, g);
    if (*prj) return apply_threads(g), run_project(pa, g);
    if (*opt) return run_optimize(of, weights_out, *opt, g);
    if (*bt) return run_backtest_cmd(bf, series_out, window, *bt, g);
    if (*gen) return run_gen(ga, g);
    if (*bench) {
      if (bench->count("--solvers") && ba.solvers.empty()) throw Usage("solver list is empty");
      return apply_threads(g), run_bench(ba, g);
    }
  } catch (const Usage& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
    if (e.code() == ErrorCode::Io) return kIo;
    if (is_convergence_failure(e.code()) || e.code() == ErrorCode::TooManyFailures) return kNoConvergence;
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

#include "cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cli/bench.hpp"
#include "cli/config.hpp"
#include "fastknock/covariance.hpp"
#include "fastknock/filter.hpp"
#include "fastknock/io.hpp"
#include "fastknock/sampler.hpp"
#include "fastknock/sdp.hpp"
#include "fastknock/synth.hpp"

namespace fastknock::cli {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Estimated diagonals can hit zero; the factor solver and sampler need d > 0.
constexpr double kDiagonalFloor = 1e-6;

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

struct ScheduleFlags {
  double lambda0 = 1.0;
  double decay = 0.5;
  double lambda_floor = 1e-8;
  double rel_tol = 0.0;
  int max_cycles = 1000000;

  void bind(ConfigBinder& b) {
    b.option("--lambda0", "lambda0", lambda0, "initial barrier coefficient");
    b.option("--decay", "decay", decay, "barrier decay factor in (0, 1)");
    b.option("--lambda-floor", "lambda_floor", lambda_floor, "stop once the barrier coefficient falls below this");
    b.option("--rel-tol", "rel_tol", rel_tol, "relative objective tolerance (default 1e-6 * p)");
    b.option("--max-cycles", "max_cycles", max_cycles, "cap on coordinate sweeps");
  }

  BarrierSchedule schedule() const {
    BarrierSchedule s;
    s.lambda0 = lambda0;
    s.decay = decay;
    s.lambda_floor = lambda_floor;
    s.max_cycles = max_cycles;
    if (rel_tol > 0.0) {
      s.rel_tol = rel_tol;
      s.scale_tol_by_dim = false;
    }
    s.validate();
    return s;
  }
};

struct CovarianceFlags {
  std::string cov;
  std::string model_d;
  std::string model_u;

  void bind(ConfigBinder& b) {
    b.option("--cov", "cov", cov, "dense p x p correlation matrix (CSV)");
    b.option("--model-d", "model_d", model_d, "factor model diagonal, p x 1 CSV");
    b.option("--model-u", "model_u", model_u, "factor model loadings, p x k CSV");
  }

  bool has_model() const { return !model_d.empty() || !model_u.empty(); }

  std::optional<Matrix> dense() const {
    if (cov.empty()) return std::nullopt;
    return read_matrix_csv(cov);
  }

  std::optional<FactorModel> model() const {
    if (!has_model()) return std::nullopt;
    if (model_d.empty() || model_u.empty()) throw InvalidArgument("--model-d and --model-u must be given together");
    FactorModel m;
    m.d = read_vector_csv(model_d);
    m.U = read_matrix_csv(model_u);
    m.validate();
    return m;
  }
};

FactorModel floor_diagonal(FactorModel m) {
  m.d = m.d.cwiseMax(kDiagonalFloor);
  return m;
}

// ---------------------------------------------------------------------------

struct EstimateCmd {
  std::string data;
  Index rank = 10;
  bool shrink = false;
  int iters = 50;
  std::string out_d;
  std::string out_u;

  void bind(ConfigBinder& b) {
    b.option("--data", "data", data, "p x n data matrix (CSV), rows are features")->required();
    b.option("-k,--rank", "rank", rank, "factor model rank");
    b.flag("--shrink", "shrink", shrink, "fit the Ledoit-Wolf shrunk covariance");
    b.option("--iters", "iters", iters, "alternating minimization iterations");
    b.option("--out-d", "out_d", out_d, "output diagonal CSV")->required();
    b.option("--out-u", "out_u", out_u, "output loadings CSV")->required();
  }

  void run() const {
    const DataMatrix dm = DataMatrix::standardize(read_matrix_csv(data));
    FactorFitOptions opts;
    opts.max_iters = iters;
    const FactorFit fit = shrink ? shrunk_factor_model(dm, rank, opts) : fit_factor_model(dm, rank, opts);
    write_vector_csv(out_d, fit.model.d);
    write_matrix_csv(out_u, fit.model.U);
    std::cout << "residual " << format_double(std::sqrt(fit.objective.back())) << '\n';
    std::cout << "delta " << format_double(fit.shrinkage.delta) << '\n';
    std::cout << "iterations " << fit.iterations << '\n';
  }
};

// ---------------------------------------------------------------------------

struct SolveCmd {
  CovarianceFlags covariance;
  ScheduleFlags sched;
  std::string solver = "factor";
  Index rank = 0;
  std::string out;

  void bind(ConfigBinder& b) {
    covariance.bind(b);
    sched.bind(b);
    b.option("--solver", "solver", solver, "equi | full | full-naive | factor | hybrid")
        ->check(CLI::IsMember({"equi", "full", "full-naive", "factor", "hybrid"}));
    b.option("-k,--rank", "rank", rank, "fit a factor model of this rank from --cov when no model is given");
    b.option("-o,--out", "out", out, "output s vector CSV; metrics go to <out>.json")->required();
  }

  FactorModel factor_model(const std::optional<Matrix>& dense) const {
    if (auto m = covariance.model()) return *m;
    if (!dense || rank < 1) throw InvalidArgument("solver '" + solver + "' needs --model-d/--model-u, or --cov with --rank");
    return floor_diagonal(fit_factor_model(*dense, rank).model);
  }

  void run() const {
    SolveOptions opts;
    opts.schedule = sched.schedule();
    const std::optional<Matrix> dense = covariance.dense();

    const auto t0 = Clock::now();
    SdpSolution sol;
    if (solver == "equi") {
      if (dense) sol = solve_equi(*dense);
      else if (auto m = covariance.model()) sol = solve_equi(*m);
      else throw InvalidArgument("equi needs --cov or a factor model");
    } else if (solver == "full" || solver == "full-naive") {
      Matrix Sigma;
      if (dense) Sigma = *dense;
      else if (auto m = covariance.model()) Sigma = m->dense();
      else throw InvalidArgument("solver '" + solver + "' needs --cov or a factor model");
      sol = solver == "full" ? solve_full_stable(Sigma, opts) : solve_full_naive(Sigma, opts);
    } else if (solver == "factor") {
      sol = solve_factor(factor_model(dense), opts);
    } else {
      const FactorModel m = factor_model(dense);
      sol = solve_hybrid(dense ? *dense : m.dense(), m, opts);
    }
    const double wall = std::chrono::duration<double>(Clock::now() - t0).count();

    write_vector_csv(out, sol.s);
    json metrics = {
        {"solver", to_string(sol.solver)},
        {"objective", sol.objective},
        {"feasibility_margin", number_or_string(sol.feasibility_margin)},
        {"cycles", sol.cycles},
        {"wall_seconds", wall},
        {"stop", to_string(sol.stop)},
        {"final_lambda", sol.final_lambda},
        {"clamps", sol.clamps},
        {"gamma", sol.gamma},
    };
    write_json(out + ".json", metrics);
    std::cout << "objective " << format_double(sol.objective) << '\n';
    std::cout << "feasibility_margin " << format_double(sol.feasibility_margin) << '\n';
    std::cout << "cycles " << sol.cycles << " (" << to_string(sol.stop) << ")\n";
  }
};

// ---------------------------------------------------------------------------

Matrix sample_with(const CovarianceFlags& covariance, const Matrix& X, const Vector& s, std::uint64_t seed) {
  try {
    if (auto m = covariance.model()) return sample_knockoffs(X, build_factor_sampler(*m, s), seed);
    if (auto dense = covariance.dense()) return sample_knockoffs(X, build_dense_sampler(*dense, s), seed);
  } catch (const NotPositiveDefinite& e) {
    throw InfeasibleSampling(std::string("infeasible s for sampling (") + e.what() +
                             "); rescale it with `solve --solver hybrid`");
  }
  throw InvalidArgument("sampling needs --cov or --model-d/--model-u");
}

struct SampleCmd {
  std::string data;
  CovarianceFlags covariance;
  std::string s_path;
  std::uint64_t seed = 0;
  bool standardize = false;
  std::string out;

  void bind(ConfigBinder& b) {
    b.option("--data", "data", data, "p x n data matrix (CSV)")->required();
    covariance.bind(b);
    b.option("--s", "s", s_path, "s vector CSV")->required();
    b.option("--seed", "seed", seed, "master RNG seed");
    b.flag("--standardize", "standardize", standardize,
           "standardize rows before sampling and map knockoffs back to the data scale");
    b.option("-o,--out", "out", out, "output p x n knockoff CSV")->required();
  }

  void run() const {
    const Matrix raw = read_matrix_csv(data);
    const Vector s = read_vector_csv(s_path);
    Matrix Xt;
    if (standardize) {
      const DataMatrix dm = DataMatrix::standardize(raw);
      Xt = sample_with(covariance, dm.X, s, seed);
      Xt = (dm.scales.asDiagonal() * Xt).colwise() + dm.means;
    } else {
      Xt = sample_with(covariance, raw, s, seed);
    }
    write_matrix_csv(out, Xt);
  }
};

// ---------------------------------------------------------------------------

struct FilterFlags {
  std::string statistic = "lcd";
  double q = 0.1;
  bool plus = true;
  int folds = 5;
  double lambda = 0.0;

  void bind(ConfigBinder& b) {
    b.option("--statistic", "statistic", statistic, "lcd | centroid")->check(CLI::IsMember({"lcd", "centroid"}));
    b.option("--q", "q", q, "target FDR");
    b.flag("--plus,!--no-plus", "plus", plus, "knockoff+ offset (default on)");
    b.option("--folds", "folds", folds, "cross-validation folds for lcd");
    b.option("--lambda", "lambda", lambda, "fixed lasso penalty for lcd (skips cross-validation)");
  }

  WStatistics statistics(const Matrix& X, const Matrix& Xt, const Vector& response) const {
    if (parse_statistic(statistic) == StatisticKind::centroid) return centroid_statistic(X, Xt, response);
    LcdOptions opts;
    opts.folds = folds;
    if (lambda > 0.0) opts.lambda = lambda;
    return lcd_statistic(X, Xt, response, opts);
  }
};

json selection_json(const Selection& sel, const WStatistics& W, const std::optional<SelectionScore>& score) {
  json j = {
      {"statistic", to_string(W.kind)},
      {"threshold", number_or_string(sel.threshold)},
      {"q", sel.q},
      {"plus", sel.plus},
      {"lambda", number_or_string(W.lambda)},
      {"selected", sel.selected.size()},
  };
  if (score) {
    j["fdp"] = score->fdp;
    j["power"] = score->power;
  }
  return j;
}

struct FilterCmd {
  std::string data;
  std::string knockoffs;
  std::string response;
  std::string truth;
  FilterFlags flags;
  std::string out;

  void bind(ConfigBinder& b) {
    b.option("--data", "data", data, "p x n data matrix (CSV)")->required();
    b.option("--knockoffs", "knockoffs", knockoffs, "p x n knockoff matrix (CSV)")->required();
    b.option("-y,--response", "response", response, "response (lcd) or +-1 labels (centroid), n values")->required();
    b.option("--truth", "truth", truth, "true support (one index per line) to score the selection");
    flags.bind(b);
    b.option("-o,--out", "out", out, "output prefix: <out>.selected.csv, <out>.W.csv, <out>.json")->required();
  }

  void run() const {
    const Matrix X = read_matrix_csv(data);
    const Matrix Xt = read_matrix_csv(knockoffs);
    const Vector y = read_vector_csv(response);
    const WStatistics W = flags.statistics(X, Xt, y);
    const Selection sel = knockoff_threshold(W, flags.q, flags.plus);
    std::optional<SelectionScore> score;
    if (!truth.empty()) score = evaluate(sel, read_index_csv(truth));
    write_index_csv(out + ".selected.csv", sel.selected);
    write_vector_csv(out + ".W.csv", W.W);
    write_json(out + ".json", selection_json(sel, W, score));
    std::cout << "threshold " << format_double(sel.threshold) << '\n';
    std::cout << "selected " << sel.selected.size() << '\n';
    if (score) std::cout << "fdp " << format_double(score->fdp) << "\npower " << format_double(score->power) << '\n';
  }
};

// ---------------------------------------------------------------------------

struct SynthCmd {
  SynthConfig cfg;
  std::string out_dir;

  void bind(ConfigBinder& b) {
    b.option("-n,--n", "n", cfg.n, "samples");
    b.option("-p,--p", "p", cfg.p, "features");
    b.option("-k,--k", "k", cfg.k, "factor rank of the generating covariance");
    b.option("--sparsity", "sparsity", cfg.sparsity, "number of non-zero coefficients");
    b.option("--amplitude", "amplitude", cfg.amplitude, "signal amplitude (coefficients are amplitude / sqrt(n))");
    b.option("--noise", "noise", cfg.noise, "noise standard deviation");
    b.option("--seed", "seed", cfg.seed, "RNG seed");
    b.option("-o,--out-dir", "out_dir", out_dir, "output directory")->required();
  }

  void run() const {
    const SynthDataset ds = synthesize(cfg);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_matrix_csv((dir / "X.csv").string(), ds.X);
    write_vector_csv((dir / "y.csv").string(), ds.y);
    write_vector_csv((dir / "beta.csv").string(), ds.beta);
    write_index_csv((dir / "support.csv").string(), ds.support);
    write_vector_csv((dir / "d.csv").string(), ds.model.d);
    write_matrix_csv((dir / "U.csv").string(), ds.model.U);
  }
};

// ---------------------------------------------------------------------------

struct BenchCmd {
  std::string mode = "solver-scaling";
  std::vector<Index> p_grid;
  Index k = 25;
  int trials = 1;
  int repeats = 3;
  std::vector<double> amplitudes;
  Index n = 600;
  Index p = 200;
  Index sparsity = 30;
  std::vector<std::string> solvers{"equi", "factor"};
  FilterFlags flags;
  std::uint64_t seed = 0;
  std::string out;

  void bind(ConfigBinder& b) {
    b.option("--mode", "mode", mode, "solver-scaling | sampler-scaling | fdr-power")
        ->check(CLI::IsMember({"solver-scaling", "sampler-scaling", "fdr-power"}));
    b.option("--p-grid", "p_grid", p_grid, "dimensions for the scaling modes")->delimiter(',');
    b.option("-k,--k", "k", k, "factor rank");
    b.option("--trials", "trials", trials, "trials per configuration");
    b.option("--repeats", "repeats", repeats, "timed sweeps (solver) or columns (sampler) per trial");
    b.option("--amplitudes", "amplitudes", amplitudes, "signal amplitudes for fdr-power")->delimiter(',');
    b.option("-n,--n", "n", n, "samples (fdr-power)");
    b.option("-p,--p", "p", p, "features (fdr-power)");
    b.option("--sparsity", "sparsity", sparsity, "non-zero coefficients (fdr-power)");
    b.option("--solvers", "solvers", solvers, "solvers compared in fdr-power: equi, factor, full")->delimiter(',');
    flags.bind(b);
    b.option("--seed", "seed", seed, "master RNG seed");
    b.option("-o,--out", "out", out, "BenchRecord CSV")->required();
  }

  void run() const {
    std::vector<BenchRecord> rows;
    if (mode == "fdr-power") {
      FdrConfig cfg;
      cfg.n = n;
      cfg.p = p;
      cfg.k = k;
      cfg.sparsity = sparsity;
      cfg.amplitudes = amplitudes;
      cfg.trials = trials;
      cfg.q = flags.q;
      cfg.plus = flags.plus;
      cfg.statistic = parse_statistic(flags.statistic);
      cfg.lcd.folds = flags.folds;
      if (flags.lambda > 0.0) cfg.lcd.lambda = flags.lambda;
      cfg.solvers = solvers;
      cfg.seed = seed;
      rows = bench_fdr_power(cfg, &std::cerr);
    } else {
      ScalingConfig cfg;
      cfg.p_grid = p_grid;
      cfg.k = k;
      cfg.trials = trials;
      cfg.repeats = repeats;
      cfg.seed = seed;
      rows = mode == "solver-scaling" ? bench_solver_scaling(cfg) : bench_sampler_scaling(cfg);
    }

    std::ofstream csv(out);
    if (!csv) throw Error("cannot open '" + out + "' for writing");
    write_bench_header(csv);
    for (const BenchRecord& r : rows) write_bench_row(csv, r);

    if (mode != "fdr-power") {
      std::map<Index, std::pair<double, int>> by_p;
      for (const BenchRecord& r : rows) {
        by_p[r.p].first += r.wall_seconds;
        by_p[r.p].second += 1;
      }
      if (by_p.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& [dim, acc] : by_p) {
          xs.push_back(static_cast<double>(dim));
          ys.push_back(acc.first / acc.second);
        }
        const double slope = loglog_slope(xs, ys);
        write_json(out + ".slope.json", {{"mode", mode}, {"k", k}, {"slope", slope}});
        std::cout << "slope " << format_double(slope) << '\n';
      }
    }
  }
};

// ---------------------------------------------------------------------------

struct PipelineCmd {
  std::string data;
  std::string response;
  std::string truth;
  CovarianceFlags covariance;
  Index rank = 10;
  bool shrink = false;
  std::string solver = "factor";
  ScheduleFlags sched;
  FilterFlags flags;
  std::uint64_t seed = 0;
  std::string out_dir;

  void bind(ConfigBinder& b) {
    b.option("--data", "data", data, "p x n data matrix (CSV)")->required();
    b.option("-y,--response", "response", response, "response or +-1 labels")->required();
    b.option("--truth", "truth", truth, "true support to score the selection");
    b.option("--model-d", "model_d", covariance.model_d, "exact factor model diagonal (skips estimation)");
    b.option("--model-u", "model_u", covariance.model_u, "exact factor model loadings");
    b.option("-k,--rank", "rank", rank, "rank of the estimated factor model");
    b.flag("--shrink", "shrink", shrink, "estimate on the Ledoit-Wolf shrunk covariance");
    b.option("--solver", "solver", solver, "equi | full | factor | hybrid")
        ->check(CLI::IsMember({"equi", "full", "factor", "hybrid"}));
    sched.bind(b);
    flags.bind(b);
    b.option("--seed", "seed", seed, "master RNG seed");
    b.option("-o,--out-dir", "out_dir", out_dir, "output directory")->required();
  }

  void run() const {
    const Matrix raw = read_matrix_csv(data);
    const Vector y = read_vector_csv(response);
    Matrix X;
    FactorModel model;
    if (auto exact = covariance.model()) {
      X = raw;
      model = *exact;
    } else {
      const DataMatrix dm = DataMatrix::standardize(raw);
      X = dm.X;
      model = floor_diagonal((shrink ? shrunk_factor_model(dm, rank) : fit_factor_model(dm, rank)).model);
    }

    SolveOptions opts;
    opts.schedule = sched.schedule();
    SdpSolution sol;
    if (solver == "equi") {
      // The equi point makes the knockoff covariance singular; step inside so the
      // unpivoted streaming factorization stays stable.
      sol = solve_equi(model);
      sol.s *= 1.0 - 1e-6;
      sol.objective = sol.s.sum();
    }
    else if (solver == "full") {
      // Solved on the correlation scale, then mapped back to the model's variances.
      sol = solve_full_stable(normalize_to_correlation(model).dense(), opts);
      sol.s.array() *= model.diagonal().array();
      sol.objective = sol.s.sum();
    }
    else sol = solve_factor(model, opts);
    // Knockoffs are drawn under the factor model, so s must be feasible for it.
    const bool rescale = solver == "hybrid" ||
                         (solver != "equi" && check_feasibility(model.op(), sol.s, opts.eigen) < 0.0);
    if (rescale) {
      const SdpSolution fixed = hybrid_rescale(model.op(), model.dim(), sol.s, opts.eigen);
      sol.s = fixed.s;
      sol.objective = fixed.objective;
      sol.feasibility_margin = fixed.feasibility_margin;
      sol.gamma = fixed.gamma;
    }

    Matrix Xt;
    try {
      Xt = sample_knockoffs(X, build_factor_sampler(model, sol.s), seed);
    } catch (const NotPositiveDefinite& e) {
      throw InfeasibleSampling(std::string("infeasible s for sampling (") + e.what() + "); try --solver hybrid");
    }
    const WStatistics W = flags.statistics(X, Xt, y);
    const Selection sel = knockoff_threshold(W, flags.q, flags.plus);
    std::optional<SelectionScore> score;
    if (!truth.empty()) score = evaluate(sel, read_index_csv(truth));

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_vector_csv((dir / "d.csv").string(), model.d);
    write_matrix_csv((dir / "U.csv").string(), model.U);
    write_vector_csv((dir / "s.csv").string(), sol.s);
    write_matrix_csv((dir / "knockoffs.csv").string(), Xt);
    write_vector_csv((dir / "W.csv").string(), W.W);
    write_index_csv((dir / "selected.csv").string(), sel.selected);
    json summary = selection_json(sel, W, score);
    summary["solver"] = solver;
    summary["objective"] = sol.objective;
    summary["feasibility_margin"] = number_or_string(sol.feasibility_margin);
    summary["cycles"] = sol.cycles;
    summary["gamma"] = sol.gamma;
    write_json((dir / "summary.json").string(), summary);
    std::cout << "selected " << sel.selected.size() << " of " << X.rows() << " features\n";
  }
};

template <class Cmd>
struct Registered {
  Cmd cmd;
  CLI::App* app = nullptr;
  std::unique_ptr<ConfigBinder> binder;

  void add(CLI::App& parent, const std::string& name, const std::string& help) {
    app = parent.add_subcommand(name, help);
    binder = std::make_unique<ConfigBinder>(*app);
    cmd.bind(*binder);
  }
  bool try_run() {
    if (!app->parsed()) return false;
    binder->apply();
    cmd.run();
    return true;
  }
};

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Gaussian model-X knockoffs: covariance estimation, SDP solve, sampling and filtering"};
  app.require_subcommand(1);

  Registered<EstimateCmd> estimate;
  Registered<SolveCmd> solve;
  Registered<SampleCmd> sample;
  Registered<FilterCmd> filter;
  Registered<SynthCmd> synth;
  Registered<BenchCmd> bench;
  Registered<PipelineCmd> pipeline;
  estimate.add(app, "estimate", "fit a diagonal-plus-low-rank covariance model to data");
  solve.add(app, "solve", "solve the knockoff SDP for s");
  sample.add(app, "sample", "sample Gaussian knockoffs");
  filter.add(app, "filter", "compute W statistics and the knockoff selection");
  synth.add(app, "synth", "generate a synthetic regression dataset");
  bench.add(app, "bench", "run scaling or FDR/power benchmarks");
  pipeline.add(app, "pipeline", "estimate, solve, sample and filter in one run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    estimate.try_run() || solve.try_run() || sample.try_run() || filter.try_run() || synth.try_run() ||
        bench.try_run() || pipeline.try_run();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fastknock::cli

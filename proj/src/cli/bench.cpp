#include "cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

#include "fastknock/io.hpp"
#include "fastknock/rng.hpp"
#include "fastknock/sampler.hpp"
#include "fastknock/synth.hpp"

namespace fastknock::cli {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::max(1e-9, std::chrono::duration<double>(Clock::now() - t0).count());
}

}  // namespace

void write_bench_header(std::ostream& out) {
  out << "p,k,solver,cycles,wall_seconds,objective,feasibility_margin,fdp,power,amplitude,trial\n";
}

void write_bench_row(std::ostream& out, const BenchRecord& r) {
  out << r.p << ',' << r.k << ',' << r.solver << ',' << r.cycles << ',' << format_double(r.wall_seconds) << ','
      << format_double(r.objective) << ',' << format_double(r.feasibility_margin) << ',' << format_double(r.fdp)
      << ',' << format_double(r.power) << ',' << format_double(r.amplitude) << ',' << r.trial << '\n';
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("slope fit needs at least two points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw InvalidArgument("slope fit needs at least two distinct x values");
  return (n * sxy - sx * sy) / denom;
}

std::vector<BenchRecord> bench_solver_scaling(const ScalingConfig& cfg) {
  std::vector<BenchRecord> rows;
  for (Index p : cfg.p_grid) {
    for (int t = 0; t < cfg.trials; ++t) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(p) * 1000 + static_cast<std::uint64_t>(t));
      const FactorModel model = benchmark_factor_correlation(p, rng, cfg.k);
      SolveOptions opts;
      opts.schedule.max_cycles = cfg.repeats;
      opts.compute_margin = false;
      const auto t0 = Clock::now();
      const SdpSolution sol = solve_factor(model, opts);
      const double wall = seconds_since(t0);
      BenchRecord r;
      r.p = p;
      r.k = model.rank();
      r.solver = "factor";
      r.cycles = sol.cycles;
      r.wall_seconds = wall / sol.cycles;
      r.objective = sol.objective;
      r.feasibility_margin = std::numeric_limits<double>::quiet_NaN();
      r.trial = t;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<BenchRecord> bench_sampler_scaling(const ScalingConfig& cfg) {
  std::vector<BenchRecord> rows;
  for (Index p : cfg.p_grid) {
    for (int t = 0; t < cfg.trials; ++t) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(p) * 1000 + static_cast<std::uint64_t>(t));
      const FactorModel model = benchmark_factor_correlation(p, rng, cfg.k);
      // s_i = d_i keeps 2 Sigma - diag(s) >= D > 0 without an eigen solve.
      const KnockoffSamplerFactor sampler = build_factor_sampler(model, model.d.cwiseMin(1.0));
      const Matrix V = rng.normal_matrix(p, cfg.repeats);
      double sink = 0.0;
      const auto t0 = Clock::now();
      for (int c = 0; c < cfg.repeats; ++c) sink += sample_low_rank(sampler.C, sampler.Z, V.col(c))(0);
      const double wall = seconds_since(t0);
      BenchRecord r;
      r.p = p;
      r.k = model.rank();
      r.solver = "sampler";
      r.cycles = cfg.repeats;
      r.wall_seconds = wall / cfg.repeats;
      r.objective = sink;
      r.feasibility_margin = std::numeric_limits<double>::quiet_NaN();
      r.trial = t;
      rows.push_back(r);
    }
  }
  return rows;
}

namespace {

// Factor solutions are rescaled when they leave the model's feasible set, since
// knockoffs are drawn under that same model.
SdpSolution fdr_solve(const std::string& solver, const FactorModel& model, const BarrierSchedule& schedule) {
  if (solver == "equi") {
    // Step off the singular equi boundary before streaming factorization.
    SdpSolution sol = solve_equi(model);
    sol.s *= 1.0 - 1e-6;
    sol.objective = sol.s.sum();
    return sol;
  }
  SolveOptions opts;
  opts.schedule = schedule;
  if (solver == "full") return solve_full_stable(model.dense(), opts);
  SdpSolution sol = solve_factor(model, opts);
  if (sol.feasibility_margin < 0.0) {
    const SdpSolution fixed = hybrid_rescale(model.op(), model.dim(), sol.s);
    sol.s = fixed.s;
    sol.objective = fixed.objective;
    sol.feasibility_margin = fixed.feasibility_margin;
    sol.gamma = fixed.gamma;
  }
  return sol;
}

}  // namespace

std::vector<BenchRecord> bench_fdr_power(const FdrConfig& cfg, std::ostream* log) {
  for (const std::string& solver : cfg.solvers) {
    if (solver != "equi" && solver != "factor" && solver != "full") {
      throw InvalidArgument("fdr-power: unknown solver '" + solver + "' (expected equi, factor or full)");
    }
  }
  std::vector<BenchRecord> rows;
  for (std::size_t a = 0; a < cfg.amplitudes.size(); ++a) {
    const double amplitude = cfg.amplitudes[a];
    std::map<std::string, std::pair<double, double>> totals;
    for (int t = 0; t < cfg.trials; ++t) {
      SynthConfig sc;
      sc.n = cfg.n;
      sc.p = cfg.p;
      sc.k = cfg.k;
      sc.sparsity = cfg.sparsity;
      sc.amplitude = amplitude;
      sc.seed = derive_seed(cfg.seed, a * 1000003 + static_cast<std::uint64_t>(t));
      const SynthDataset data = synthesize(sc);
      const std::uint64_t knockoff_seed = derive_seed(sc.seed, 1);
      Vector labels;
      if (cfg.statistic == StatisticKind::centroid) {
        labels = data.y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
      }

      for (const std::string& solver : cfg.solvers) {
        try {
          const auto t0 = Clock::now();
          const SdpSolution sol = fdr_solve(solver, data.model, cfg.schedule);
          const double wall = seconds_since(t0);

          const KnockoffSamplerFactor sampler = build_factor_sampler(data.model, sol.s);
          const Matrix Xt = sample_knockoffs(data.X, sampler, knockoff_seed);
          const WStatistics W = cfg.statistic == StatisticKind::lcd ? lcd_statistic(data.X, Xt, data.y, cfg.lcd)
                                                                     : centroid_statistic(data.X, Xt, labels);
          const SelectionScore score = evaluate(knockoff_threshold(W, cfg.q, cfg.plus), data.support);

          BenchRecord r;
          r.p = cfg.p;
          r.k = cfg.k;
          r.solver = solver;
          r.cycles = sol.cycles;
          r.wall_seconds = wall;
          r.objective = sol.objective;
          r.feasibility_margin = sol.feasibility_margin;
          r.fdp = score.fdp;
          r.power = score.power;
          r.amplitude = amplitude;
          r.trial = t;
          rows.push_back(r);
          totals[solver].first += score.fdp;
          totals[solver].second += score.power;
        } catch (const Error& e) {
          if (log != nullptr) {
            *log << "amplitude " << amplitude << " trial " << t << " " << solver << " failed: " << e.what() << '\n';
          }
        }
      }
    }
    if (log != nullptr) {
      for (const auto& [solver, sums] : totals) {
        *log << "amplitude " << amplitude << " " << solver << ": mean fdp " << sums.first / cfg.trials
             << ", mean power " << sums.second / cfg.trials << '\n';
      }
    }
  }
  return rows;
}

}  // namespace fastknock::cli

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "fastknock/filter.hpp"
#include "fastknock/linalg.hpp"
#include "fastknock/sdp.hpp"

namespace fastknock::cli {

struct BenchRecord {
  Index p = 0;
  Index k = 0;
  std::string solver;
  int cycles = 1;
  double wall_seconds = 0.0;
  double objective = 0.0;
  double feasibility_margin = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  double amplitude = 0.0;
  int trial = 0;
};

void write_bench_header(std::ostream& out);
void write_bench_row(std::ostream& out, const BenchRecord& r);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ScalingConfig {
  std::vector<Index> p_grid;
  Index k = 25;
  int trials = 1;
  /// Sweeps timed per solver run; columns drawn per sampler run.
  int repeats = 3;
  std::uint64_t seed = 0;
};

/// Factor-solver wall time per sweep on benchmark covariances, one row per (p, trial).
std::vector<BenchRecord> bench_solver_scaling(const ScalingConfig& cfg);

/// Streaming sampler wall time per column, one row per (p, trial).
std::vector<BenchRecord> bench_sampler_scaling(const ScalingConfig& cfg);

struct FdrConfig {
  Index n = 600;
  Index p = 200;
  Index k = 20;
  Index sparsity = 30;
  std::vector<double> amplitudes;
  int trials = 100;
  double q = 0.1;
  bool plus = true;
  StatisticKind statistic = StatisticKind::lcd;
  LcdOptions lcd{};
  std::vector<std::string> solvers{"equi", "factor"};
  BarrierSchedule schedule{};
  std::uint64_t seed = 0;
};

/// Synthetic FDR/power experiment with the exact generating covariance.
/// Rows are ordered by (amplitude, trial, solver).
std::vector<BenchRecord> bench_fdr_power(const FdrConfig& cfg, std::ostream* log = nullptr);

}  // namespace fastknock::cli

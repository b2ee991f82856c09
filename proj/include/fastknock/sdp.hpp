#pragma once

#include <functional>
#include <string>

#include "fastknock/covariance.hpp"
#include "fastknock/linalg.hpp"

namespace fastknock {

/// Log-barrier continuation for the knockoff SDP.
///
/// lambda is only decayed once the coordinate sweeps at the current value have
/// settled (estimated distance to the fixed point below centering * lambda).
/// The run stops when two consecutive settled objectives agree to the
/// relative tolerance, when lambda drops under lambda_floor, or after
/// max_cycles sweeps.
struct BarrierSchedule {
  double lambda0 = 1.0;
  double decay = 0.5;
  double lambda_floor = 1e-8;
  /// Relative objective tolerance; multiplied by p when scale_tol_by_dim is set.
  double rel_tol = 1e-6;
  bool scale_tol_by_dim = true;
  int max_cycles = 1000000;
  double centering = 0.1;

  void validate() const;
  double tolerance(Index p) const { return scale_tol_by_dim ? rel_tol * static_cast<double>(p) : rel_tol; }
};

enum class SolverKind { equi, full_naive, full_stable, factor, hybrid };
std::string to_string(SolverKind kind);

enum class StopReason { converged, lambda_floor, max_cycles, closed_form };
std::string to_string(StopReason reason);

struct SdpSolution {
  Vector s;
  double objective = 0.0;
  /// lambda_min(2 Sigma - diag(s)); NaN when not computed.
  double feasibility_margin = 0.0;
  int cycles = 0;
  SolverKind solver = SolverKind::equi;
  StopReason stop = StopReason::closed_form;
  double final_lambda = 0.0;
  /// Factor solver: number of times s_j was pushed off 2 d_j.
  int clamps = 0;
  /// Stable solver: downdates retried with a pulled-back s_j.
  int retries = 0;
  /// Hybrid: scale applied to the raw factor solution.
  double gamma = 1.0;

  bool hit_max_cycles() const { return stop == StopReason::max_cycles; }
};

struct SolveOptions {
  BarrierSchedule schedule{};
  /// Called after every coordinate update with (j, lambda, s).
  std::function<void(Index, double, const Vector&)> on_update;
  /// Called after every sweep with (cycle, lambda, s).
  std::function<void(int, double, const Vector&)> on_cycle;
  /// Called with (lambda, s) when an extrapolation move between sweeps changes s.
  std::function<void(double, const Vector&)> on_extrapolate;
  bool compute_margin = true;
  EigenOptions eigen{};
};

/// Equicorrelated construction s_i = min(1, 2 lambda_min(Sigma)).
SdpSolution solve_equi(const Matrix& Sigma, const EigenOptions& eig = {});
SdpSolution solve_equi(const FactorModel& model, const EigenOptions& eig = {});

/// Coordinate ascent with a fresh (p-1) x (p-1) solve per coordinate. O(p^4) per sweep.
SdpSolution solve_full_naive(const Matrix& Sigma, const SolveOptions& opts = {});

/// Coordinate ascent on a Cholesky factor of 2 Sigma - diag(s) kept current by
/// rank-one updates. O(p^3) per sweep.
SdpSolution solve_full_stable(const Matrix& Sigma, const SolveOptions& opts = {});

/// Coordinate ascent exploiting Sigma = D + U U^T. O(p k^2) per sweep.
SdpSolution solve_factor(const FactorModel& model, const SolveOptions& opts = {});

/// Largest gamma in [0, 1] with diag(gamma * s_hat) <= 2 Sigma, found by
/// bisection to 1e-8; the returned s = min(1, gamma * s_hat).
SdpSolution hybrid_rescale(const LinearOperator& Sigma, Index p, const Vector& s_hat,
                           const EigenOptions& eig = {});

/// Factor solve followed by a rescale against the full covariance.
SdpSolution solve_hybrid(const Matrix& Sigma, const FactorModel& model, const SolveOptions& opts = {});

/// lambda_min(2 Sigma - diag(s)).
double check_feasibility(const LinearOperator& Sigma, const Vector& s, const EigenOptions& eig = {});

}  // namespace fastknock

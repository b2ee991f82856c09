#include "fastknock/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace fastknock {

void BarrierSchedule::validate() const {
  if (!(lambda0 > 0.0)) throw InvalidArgument("barrier schedule: lambda0 must be > 0");
  if (!(decay > 0.0 && decay < 1.0)) throw InvalidArgument("barrier schedule: decay must lie in (0, 1)");
  if (!(lambda_floor > 0.0)) throw InvalidArgument("barrier schedule: lambda_floor must be > 0");
  if (!(rel_tol > 0.0)) throw InvalidArgument("barrier schedule: rel_tol must be > 0");
  if (max_cycles < 1) throw InvalidArgument("barrier schedule: max_cycles must be >= 1");
  if (!(centering > 0.0)) throw InvalidArgument("barrier schedule: centering must be > 0");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::equi: return "equi";
    case SolverKind::full_naive: return "full_naive";
    case SolverKind::full_stable: return "full_stable";
    case SolverKind::factor: return "factor";
    case SolverKind::hybrid: return "hybrid";
  }
  return "unknown";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::converged: return "converged";
    case StopReason::lambda_floor: return "lambda-floor";
    case StopReason::max_cycles: return "max-cycles";
    case StopReason::closed_form: return "closed-form";
  }
  return "unknown";
}

double check_feasibility(const LinearOperator& Sigma, const Vector& s, const EigenOptions& eig) {
  const LinearOperator shifted = [&Sigma, &s](const Vector& v) -> Vector {
    return 2.0 * Sigma(v) - s.cwiseProduct(v);
  };
  return min_eigenvalue(shifted, s.size(), eig);
}

namespace {

void require_correlation(const Matrix& Sigma) {
  if (Sigma.rows() != Sigma.cols() || Sigma.rows() == 0) {
    throw DimensionMismatch("covariance must be a non-empty square matrix");
  }
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw InvalidArgument("covariance is not symmetric");
  }
  for (Index i = 0; i < Sigma.rows(); ++i) {
    if (std::abs(Sigma(i, i) - 1.0) > 1e-6) {
      throw InvalidArgument("covariance must have unit diagonal; standardize it to a correlation matrix first");
    }
  }
}

SdpSolution equi_from_min_eig(double lmin, Index p) {
  if (lmin < -1e-8) throw NotPositiveDefinite("input not PSD: lambda_min = " + std::to_string(lmin));
  SdpSolution sol;
  sol.solver = SolverKind::equi;
  sol.stop = StopReason::closed_form;
  sol.s = Vector::Constant(p, std::clamp(2.0 * lmin, 0.0, 1.0));
  sol.objective = sol.s.sum();
  sol.feasibility_margin = 2.0 * lmin - sol.s(0);
  sol.cycles = 1;
  return sol;
}

// Runs barrier continuation over an engine exposing s(), begin_sweep() and update(j, lambda).
template <class Engine>
void run_schedule(Engine& engine, Index p, const SolveOptions& opts, SdpSolution& sol) {
  const BarrierSchedule& sched = opts.schedule;
  sched.validate();
  const double tol = sched.tolerance(p);

  double lambda = sched.lambda0;
  Vector before(p), step(p), delta(p), prev_delta = Vector::Zero(p);
  std::optional<double> q_last;
  std::optional<double> prev_obj;
  int stage_sweeps = 0;
  bool jumped = false;
  sol.stop = StopReason::max_cycles;

  while (sol.cycles < sched.max_cycles) {
    before = engine.s();
    engine.begin_sweep();
    for (Index j = 0; j < p; ++j) {
      engine.update(j, lambda);
      if (opts.on_update) opts.on_update(j, lambda, engine.s());
    }
    ++sol.cycles;
    ++stage_sweeps;
    if (opts.on_cycle) opts.on_cycle(sol.cycles, lambda, engine.s());

    // Aitken estimate of the distance to the center, with the contraction rate
    // taken from the coordinates carrying the dominant steps. Smaller coordinates
    // can grow transiently while the dominant mode decays. The rate is measured
    // afresh in every stage; after an extrapolation move the stage's last
    // estimate stands in.
    step = engine.s() - before;
    delta = step.cwiseAbs();
    const double dmax = delta.maxCoeff();
    bool centered = dmax == 0.0;
    bool fresh = false;
    if (!centered) {
      std::optional<double> q;
      if (stage_sweeps >= 2 && !jumped) {
        fresh = true;
        double worst = 0.0;
        for (Index j = 0; j < p; ++j) {
          if (delta(j) < 0.5 * dmax) continue;
          const double ratio =
              prev_delta(j) > 0.0 ? delta(j) / prev_delta(j) : std::numeric_limits<double>::infinity();
          worst = std::max(worst, ratio);
        }
        q = std::min(worst, 1.0 - 1e-12);
        q_last = q;
      } else {
        q = q_last;
      }
      if (q) centered = dmax * *q / (1.0 - *q) <= sched.centering * lambda;
      // Slow linear convergence: move along the last sweep's step, either to the
      // extrapolated limit or as far as doubling the length keeps raising the
      // barrier objective, whichever is better.
      jumped = false;
      if (!centered && fresh && *q >= 0.5) {
        const auto barrier = [&](const Vector& v) { return v.sum() + lambda * engine.log_det(v); };
        const Vector start = engine.s();
        const double f0 = barrier(start);
        double best = f0;
        Vector best_s;
        const auto consider = [&](double t) {
          Vector trial = (start + t * step).cwiseMax(0.0).cwiseMin(1.0);
          const double f = barrier(trial);
          if (!(f > best)) return false;
          best = f;
          best_s = std::move(trial);
          return true;
        };
        for (double t = 1.0; t <= 1e6; t *= 2.0) {
          if (!consider(t)) break;
        }
        consider(*q / (1.0 - *q));
        if (best > f0) {
          engine.reset(best_s);
          jumped = true;
          if (opts.on_extrapolate) opts.on_extrapolate(lambda, engine.s());
        }
      }
    }
    std::swap(prev_delta, delta);

    if (!centered) continue;
    const double obj = engine.s().sum();
    if (prev_obj && obj > 0.0 && std::abs(obj - *prev_obj) <= tol * obj) {
      sol.stop = StopReason::converged;
      break;
    }
    prev_obj = obj;
    lambda *= sched.decay;
    stage_sweeps = 0;
    q_last.reset();
    if (lambda < sched.lambda_floor) {
      sol.stop = StopReason::lambda_floor;
      break;
    }
  }
  sol.final_lambda = lambda;
  sol.s = engine.s();
  sol.objective = sol.s.sum();
}

double clip_unit(double v) { return std::clamp(v, 0.0, 1.0); }

// log det(2 Sigma - diag(s)), or -inf outside the feasible set. work is scratch.
double dense_log_det(const Matrix& Sigma, double scale, const Vector& s, Matrix& work) {
  work = scale * Sigma;
  work.diagonal() -= s;
  Eigen::LLT<Eigen::Ref<Matrix>> llt(work);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  return 2.0 * work.diagonal().array().log().sum();
}

// Solves the (p-1)-dimensional system Q_j afresh for every coordinate.
class NaiveEngine {
 public:
  explicit NaiveEngine(const Matrix& Sigma)
      : Sigma_(Sigma), p_(Sigma.rows()), s_(Vector::Zero(p_)), Q_(p_ - 1, p_ - 1), b_(p_ - 1) {}

  const Vector& s() const { return s_; }
  void begin_sweep() {}
  void reset(const Vector& s) { s_ = s; }
  double log_det(const Vector& s) { return dense_log_det(Sigma_, 2.0, s, work_); }

  void update(Index j, double lambda) {
    double quad = 0.0;
    if (p_ > 1) {
      for (Index a = 0, ia = 0; a < p_; ++a) {
        if (a == j) continue;
        b_(ia) = Sigma_(a, j);
        for (Index b = 0, ib = 0; b < p_; ++b) {
          if (b == j) continue;
          Q_(ia, ib) = 2.0 * Sigma_(a, b) - (a == b ? s_(a) : 0.0);
          ++ib;
        }
        ++ia;
      }
      llt_.compute(Q_);
      if (llt_.info() != Eigen::Success) throw NotPositiveDefinite("iterate left the feasible set");
      y_ = b_;
      llt_.solveInPlace(y_);
      quad = b_.dot(y_);
    }
    s_(j) = clip_unit(2.0 * Sigma_(j, j) - 4.0 * quad - lambda);
  }

 private:
  const Matrix& Sigma_;
  Index p_;
  Vector s_;
  Matrix Q_;
  Vector b_;
  Vector y_;
  Eigen::LLT<Matrix> llt_;
  Matrix work_;
};

// Keeps L L^T = 2 Sigma - diag(s) via rank-one updates on e_j.
class StableEngine {
 public:
  explicit StableEngine(const Matrix& Sigma)
      : twoSigma_(2.0 * Sigma),
        p_(Sigma.rows()),
        s_(Vector::Zero(p_)),
        L_(LowerTriangularFactor::factor(twoSigma_)),
        x_(p_) {}

  const Vector& s() const { return s_; }
  int retries() const { return retries_; }
  // The factor is rebuilt from s at the next sweep.
  void reset(const Vector& s) { s_ = s; }
  double log_det(const Vector& s) { return dense_log_det(twoSigma_, 1.0, s, scratch_); }

  void begin_sweep() {
    work_ = twoSigma_;
    work_.diagonal() -= s_;
    L_.refactor(work_);
  }

  void update(Index j, double lambda) {
    x_ = twoSigma_.col(j);
    x_(j) = 0.0;
    L_.matrix().triangularView<Eigen::Lower>().solveInPlace(x_);
    const double x2 = x_.squaredNorm();
    const double zeta = twoSigma_(j, j) - s_(j);
    const double c = zeta * x2 / (zeta + x2);
    const double target = clip_unit(twoSigma_(j, j) - c - lambda);
    apply(j, target);
  }

 private:
  void apply(Index j, double target) {
    const double change = target - s_(j);
    if (change == 0.0) return;
    if (change < 0.0) {
      L_.rank_one_unit_in_place(j, std::sqrt(-change), +1);
      s_(j) = target;
      return;
    }
    try {
      L_.rank_one_unit_in_place(j, std::sqrt(change), -1);
      s_(j) = target;
      return;
    } catch (const DowndateFailure&) {
    }
    ++retries_;
    const double pulled = target - 1e-9;
    const double smaller = pulled - s_(j);
    if (smaller <= 0.0) {
      if (smaller < 0.0) L_.rank_one_unit_in_place(j, std::sqrt(-smaller), +1);
    } else {
      L_.rank_one_unit_in_place(j, std::sqrt(smaller), -1);
    }
    s_(j) = std::max(0.0, pulled);
  }

  Matrix twoSigma_;
  Index p_;
  Vector s_;
  LowerTriangularFactor L_;
  Vector x_;
  Matrix work_;
  Matrix scratch_;
  int retries_ = 0;
};

// Works with M = U^T (2D - diag(s))^{-1} U through QR factors of I + 2M.
class FactorEngine {
 public:
  explicit FactorEngine(const FactorModel& model)
      : d_(model.d), U_(model.U), p_(model.dim()), k_(model.rank()), s_(Vector::Zero(p_)) {
    model.validate();
    if ((d_.array() <= 0.0).any()) throw InvalidArgument("factor solver needs d > 0 elementwise");
    sigma_diag_ = model.diagonal();
  }

  const Vector& s() const { return s_; }
  int clamps() const { return clamps_; }
  void reset(const Vector& s) { s_ = s; }

  // With A = 2D - diag(s) and G = I + 2 U^T A^{-1} U, 2 Sigma - diag(s) is positive
  // definite exactly when A and G have the same number of negative eigenvalues, and
  // its determinant is det(A) det(G).
  double log_det(const Vector& s) const {
    const Vector a = 2.0 * d_ - s;
    if ((a.array().abs() < 1e-10).any()) return -std::numeric_limits<double>::infinity();
    Matrix G = Matrix::Identity(k_, k_);
    G.noalias() += 2.0 * U_.transpose() * a.cwiseInverse().asDiagonal() * U_;
    const Vector g = Eigen::SelfAdjointEigenSolver<Matrix>(G, Eigen::EigenvaluesOnly).eigenvalues();
    if ((g.array() == 0.0).any() || (a.array() < 0.0).count() != (g.array() < 0.0).count()) {
      return -std::numeric_limits<double>::infinity();
    }
    return a.array().abs().log().sum() + g.array().abs().log().sum();
  }

  void begin_sweep() {
    const Vector w = (2.0 * d_ - s_).cwiseInverse();
    Matrix A = Matrix::Identity(k_, k_);
    A.noalias() += 2.0 * U_.transpose() * w.asDiagonal() * U_;
    F_ = QRFactors::decompose(A);
  }

  void update(Index j, double lambda) {
    const Vector z = U_.row(j).transpose();
    qr_rank_one_in_place(F_, 2.0 / (s_(j) - 2.0 * d_(j)), z);
    // 2 Sigma_jj - 4 z^T y + 8 y^T x with y = M_j z, x = (I + 2 M_j)^{-1} y collapses to
    // 2 d_j + 2 z^T (I + 2 M_j)^{-1} z, which avoids cancelling O(1 / (2 d_j - s_j)) terms.
    const Vector w = F_.solve(z);
    double next = clip_unit(2.0 * d_(j) + 2.0 * z.dot(w) - lambda);
    if (std::abs(2.0 * d_(j) - next) < 1e-10) {
      next = std::max(0.0, 2.0 * d_(j) - 1e-7);
      ++clamps_;
    }
    s_(j) = next;
    qr_rank_one_in_place(F_, 2.0 / (2.0 * d_(j) - next), z);
  }

 private:
  Vector d_;
  Matrix U_;
  Index p_;
  Index k_;
  Vector s_;
  Vector sigma_diag_;
  QRFactors F_;
  int clamps_ = 0;
};

}  // namespace

SdpSolution solve_equi(const Matrix& Sigma, const EigenOptions& eig) {
  require_correlation(Sigma);
  return equi_from_min_eig(min_eigenvalue(dense_operator(Sigma), Sigma.rows(), eig), Sigma.rows());
}

SdpSolution solve_equi(const FactorModel& model, const EigenOptions& eig) {
  model.validate();
  return equi_from_min_eig(min_eigenvalue(model.op(), model.dim(), eig), model.dim());
}

SdpSolution solve_full_naive(const Matrix& Sigma, const SolveOptions& opts) {
  require_correlation(Sigma);
  if (Eigen::LLT<Matrix>(Sigma).info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
  NaiveEngine engine(Sigma);
  SdpSolution sol;
  sol.solver = SolverKind::full_naive;
  run_schedule(engine, Sigma.rows(), opts, sol);
  sol.feasibility_margin = opts.compute_margin ? check_feasibility(dense_operator(Sigma), sol.s, opts.eigen)
                                               : std::numeric_limits<double>::quiet_NaN();
  return sol;
}

SdpSolution solve_full_stable(const Matrix& Sigma, const SolveOptions& opts) {
  require_correlation(Sigma);
  StableEngine engine(Sigma);
  SdpSolution sol;
  sol.solver = SolverKind::full_stable;
  run_schedule(engine, Sigma.rows(), opts, sol);
  sol.retries = engine.retries();
  sol.feasibility_margin = opts.compute_margin ? check_feasibility(dense_operator(Sigma), sol.s, opts.eigen)
                                               : std::numeric_limits<double>::quiet_NaN();
  return sol;
}

SdpSolution solve_factor(const FactorModel& model, const SolveOptions& opts) {
  FactorEngine engine(model);
  SdpSolution sol;
  sol.solver = SolverKind::factor;
  run_schedule(engine, model.dim(), opts, sol);
  sol.clamps = engine.clamps();
  sol.feasibility_margin = opts.compute_margin ? check_feasibility(model.op(), sol.s, opts.eigen)
                                               : std::numeric_limits<double>::quiet_NaN();
  return sol;
}

SdpSolution hybrid_rescale(const LinearOperator& Sigma, Index p, const Vector& s_hat, const EigenOptions& eig) {
  if (s_hat.size() != p) throw DimensionMismatch("hybrid_rescale: s has the wrong length");
  if ((s_hat.array() < 0.0).any()) throw InvalidArgument("hybrid_rescale: s must be non-negative");
  SdpSolution sol;
  sol.solver = SolverKind::hybrid;
  sol.stop = StopReason::closed_form;
  sol.cycles = 1;
  if (s_hat.isZero(0.0)) {
    sol.s = Vector::Zero(p);
    sol.gamma = 1.0;
    sol.feasibility_margin = check_feasibility(Sigma, sol.s, eig);
    return sol;
  }
  double gamma = 1.0;
  double margin = check_feasibility(Sigma, s_hat, eig);
  if (margin < 0.0) {
    double lo = 0.0;
    double hi = 1.0;
    double lo_margin = check_feasibility(Sigma, Vector::Zero(p), eig);
    while (hi - lo > 1e-8) {
      const double mid = 0.5 * (lo + hi);
      const double m = check_feasibility(Sigma, mid * s_hat, eig);
      if (m >= 0.0) {
        lo = mid;
        lo_margin = m;
      } else {
        hi = mid;
      }
    }
    gamma = lo;
    margin = lo_margin;
  }
  sol.gamma = gamma;
  sol.s = (gamma * s_hat).cwiseMin(1.0);
  sol.objective = sol.s.sum();
  sol.feasibility_margin = (sol.s.array() < gamma * s_hat.array()).any() ? check_feasibility(Sigma, sol.s, eig)
                                                                          : margin;
  return sol;
}

SdpSolution solve_hybrid(const Matrix& Sigma, const FactorModel& model, const SolveOptions& opts) {
  require_correlation(Sigma);
  if (model.dim() != Sigma.rows()) throw DimensionMismatch("solve_hybrid: model and covariance sizes differ");
  SolveOptions raw = opts;
  raw.compute_margin = false;
  const SdpSolution factor = solve_factor(model, raw);
  SdpSolution sol = hybrid_rescale(dense_operator(Sigma), Sigma.rows(), factor.s, opts.eigen);
  sol.cycles = factor.cycles;
  sol.stop = factor.stop;
  sol.final_lambda = factor.final_lambda;
  sol.clamps = factor.clamps;
  return sol;
}

}  // namespace fastknock

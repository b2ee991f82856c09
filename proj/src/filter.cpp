#include "fastknock/filter.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <optional>
#include <string>

namespace fastknock {

std::string to_string(StatisticKind kind) { return kind == StatisticKind::lcd ? "lcd" : "centroid"; }

StatisticKind parse_statistic(const std::string& name) {
  if (name == "lcd") return StatisticKind::lcd;
  if (name == "centroid") return StatisticKind::centroid;
  throw InvalidArgument("unknown statistic '" + name + "' (expected lcd or centroid)");
}

namespace {

double soft_threshold(double x, double t) {
  if (x > t) return x - t;
  if (x < -t) return x + t;
  return 0.0;
}

// Duality gap of (1/2m)||R||^2 + lambda ||beta||_1 from normalized inner products:
// r2 = ||R||^2 / m, ry = R^T y / m, corr = ||A^T R||_inf / m.
double duality_gap(double r2, double ry, double corr, double lambda, double l1) {
  const double scale = corr > lambda ? lambda / corr : 1.0;
  return 0.5 * r2 * (1.0 + scale * scale) + lambda * l1 - scale * ry;
}

// Lasso in covariance form: G = A^T A / m, c = A^T y / m, yy = ||y||^2 / m.
struct GramLasso {
  Matrix G;
  Vector c;
  double yy = 0.0;
};

// Coordinate descent with sign-fixed support steps, from the warm start in beta.
// g must equal G beta on entry.
LassoResult solve_gram(const GramLasso& P, double lambda, Vector beta, Vector& g, const LassoOptions& opts) {
  const Index d = P.c.size();
  LassoResult res;
  const double target = opts.tol * 0.5 * P.yy;
  auto update = [&](Index j) {
    const double gjj = P.G(j, j);
    if (gjj <= 0.0) return;
    const double old = beta(j);
    const double next = soft_threshold(P.c(j) - g(j) + gjj * old, lambda) / gjj;
    if (next == old) return;
    g.noalias() += (next - old) * P.G.col(j);
    beta(j) = next;
  };
  auto gap = [&](const Vector& b, const Vector& gb) {
    const double cb = P.c.dot(b);
    const double r2 = std::max(0.0, P.yy - 2.0 * cb + b.dot(gb));
    return duality_gap(r2, P.yy - cb, (P.c - gb).cwiseAbs().maxCoeff(), lambda, b.lpNorm<1>());
  };
  std::vector<Index> active;
  for (res.sweeps = 0; res.sweeps < opts.max_sweeps;) {
    for (Index j = 0; j < d; ++j) update(j);
    ++res.sweeps;
    res.gap = gap(beta, g);
    if (res.gap <= target) {
      res.converged = true;
      break;
    }
    active.clear();
    for (Index j = 0; j < d; ++j)
      if (beta(j) != 0.0) active.push_back(j);

    // With the signs fixed the problem on the support is a linear system.
    // Move towards its solution as far as the true objective keeps falling;
    // coordinates that reach zero on the way leave the support and the system
    // is solved again. Coordinate descent alone crawls here when the columns
    // are strongly correlated.
    bool moved = false;
    std::optional<LowerTriangularFactor> chol;
    try {
      if (!active.empty()) chol = LowerTriangularFactor::factor(P.G(active, active));
    } catch (const NotPositiveDefinite&) {
      active.clear();
    }
    while (!active.empty()) {
      const Index na = static_cast<Index>(active.size());
      const auto L = chol->matrix().triangularView<Eigen::Lower>();
      auto gaa = [&](const Vector& v) -> Vector { return L * (L.transpose() * v); };
      const Vector b = beta(active);
      const Vector sign = b.cwiseSign();
      Vector dir = P.c(active) - lambda * sign;
      L.solveInPlace(dir);
      L.transpose().solveInPlace(dir);
      dir -= b;
      if (!dir.allFinite()) break;
      const Vector gdir = gaa(dir);
      // Objective along b + t dir, up to a constant.
      const double slope = b.dot(gdir) - P.c(active).dot(dir);
      const double curv = dir.dot(gdir);
      auto along = [&](double t) { return t * slope + 0.5 * t * t * curv + lambda * (b + t * dir).lpNorm<1>(); };
      double best_t = 1.0;
      double best_f = along(1.0);
      for (Index i = 0; i < na; ++i) {
        const double t = -b(i) / dir(i);
        if (t > 0.0 && t < 1.0 && along(t) < best_f) {
          best_t = t;
          best_f = along(t);
        }
      }
      // Also try the full step with every sign violator dropped at once.
      Vector clipped = b + dir;
      for (Index i = 0; i < na; ++i)
        if (clipped(i) * sign(i) <= 0.0) clipped(i) = 0.0;
      const Vector change = clipped - b;
      const double clipped_f =
          change.dot(gaa(b + 0.5 * change)) - P.c(active).dot(change) + lambda * clipped.lpNorm<1>();
      if (!(std::min(best_f, clipped_f) < along(0.0))) break;
      Vector next = clipped_f < best_f ? clipped : Vector(b + best_t * dir);
      std::vector<Index> kept;
      for (Index i = 0; i < na; ++i) {
        if (next(i) * sign(i) <= 0.0 || std::abs(next(i)) <= 1e-14 * std::abs(b(i))) next(i) = 0.0;
        else kept.push_back(active[i]);
      }
      beta(active) = next;
      moved = true;
      if (kept.size() == active.size()) break;
      for (Index i = na - 1; i >= 0; --i)
        if (next(i) == 0.0) chol->erase(i);
      active = std::move(kept);
    }
    if (moved) g.noalias() = P.G * beta;
  }
  res.beta = std::move(beta);
  return res;
}

Vector log_grid(double hi, double ratio, int count) {
  Vector grid(count);
  for (int i = 0; i < count; ++i) {
    const double t = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
    grid(i) = hi * std::pow(ratio, t);
  }
  return grid;
}

}  // namespace

LassoResult lasso_coordinate_descent(const Matrix& A, const Vector& y, double lambda, const LassoOptions& opts) {
  const Index m = A.rows();
  const Index d = A.cols();
  if (y.size() != m) throw DimensionMismatch("lasso: y has the wrong length");
  if (!(lambda >= 0.0)) throw InvalidArgument("lasso: lambda must be >= 0");
  const double mm = static_cast<double>(m);
  const Vector col2 = A.colwise().squaredNorm().transpose() / mm;
  const double yy = y.squaredNorm() / mm;
  const double target = opts.tol * 0.5 * yy;

  LassoResult res;
  Vector beta = Vector::Zero(d);
  Vector r = y;
  for (res.sweeps = 0; res.sweeps < opts.max_sweeps;) {
    for (Index j = 0; j < d; ++j) {
      if (col2(j) <= 0.0) continue;
      const double old = beta(j);
      const double next = soft_threshold(A.col(j).dot(r) / mm + col2(j) * old, lambda) / col2(j);
      if (next != old) {
        r.noalias() -= (next - old) * A.col(j);
        beta(j) = next;
      }
    }
    ++res.sweeps;
    const double corr = (A.transpose() * r).cwiseAbs().maxCoeff() / mm;
    res.gap = duality_gap(r.squaredNorm() / mm, r.dot(y) / mm, corr, lambda, beta.lpNorm<1>());
    if (res.gap <= target) {
      res.converged = true;
      break;
    }
  }
  res.beta = std::move(beta);
  return res;
}

WStatistics lcd_statistic(const Matrix& X, const Matrix& Xt, const Vector& y, const LcdOptions& opts) {
  const Index p = X.rows();
  const Index n = X.cols();
  if (Xt.rows() != p || Xt.cols() != n) throw DimensionMismatch("lcd: knockoff matrix shape differs from data");
  if (y.size() != n) {
    throw DimensionMismatch("lcd: response has length " + std::to_string(y.size()) + ", expected " + std::to_string(n));
  }
  if (opts.folds < 2 && !opts.lambda) throw InvalidArgument("lcd: need at least 2 folds");
  if (opts.grid < 1) throw InvalidArgument("lcd: empty lambda grid");

  Matrix A(n, 2 * p);
  A.leftCols(p) = X.transpose();
  A.rightCols(p) = Xt.transpose();
  const double nn = static_cast<double>(n);
  for (Index j = 0; j < 2 * p; ++j) {
    auto col = A.col(j);
    col.array() -= col.mean();
    const double sd = std::sqrt(col.squaredNorm() / nn);
    if (sd > 1e-12) col /= sd;
    else col.setZero();
  }
  const Vector yc = (y.array() - y.mean()).matrix();

  WStatistics out;
  out.kind = StatisticKind::lcd;
  out.W = Vector::Zero(p);

  GramLasso full;
  full.G = A.transpose() * A / nn;
  full.c = A.transpose() * yc / nn;
  full.yy = yc.squaredNorm() / nn;
  const double lambda_max = full.c.cwiseAbs().maxCoeff();
  if (!(lambda_max > 0.0)) {
    out.lambda = 0.0;
    return out;
  }

  auto run_path = [&](const GramLasso& P, const Vector& grid, Index upto, auto&& visit) {
    Vector beta = Vector::Zero(P.c.size());
    Vector g = Vector::Zero(P.c.size());
    for (Index l = 0; l <= upto; ++l) {
      LassoResult r = solve_gram(P, grid(l), beta, g, opts.lasso);
      beta = std::move(r.beta);
      visit(l, beta);
    }
    return beta;
  };

  Vector beta;
  if (opts.lambda) {
    out.lambda = *opts.lambda;
    Vector grid(1);
    grid(0) = *opts.lambda;
    beta = run_path(full, grid, 0, [](Index, const Vector&) {});
  } else {
    const Vector grid = log_grid(lambda_max, opts.min_ratio, opts.grid);
    Vector cv_error = Vector::Zero(opts.grid);
    const Index folds = std::min<Index>(opts.folds, n);
    for (Index f = 0; f < folds; ++f) {
      const Index lo = f * n / folds;
      const Index hi = (f + 1) * n / folds;
      const Index m = hi - lo;
      if (m == 0 || m == n) continue;
      const auto Af = A.middleRows(lo, m);
      const auto yf = yc.segment(lo, m);
      const double mt = static_cast<double>(n - m);
      GramLasso train;
      train.G = (full.G * nn - Af.transpose() * Af) / mt;
      train.c = (full.c * nn - Af.transpose() * yf) / mt;
      train.yy = (full.yy * nn - yf.squaredNorm()) / mt;
      run_path(train, grid, opts.grid - 1, [&](Index l, const Vector& b) {
        cv_error(l) += (yf - Af * b).squaredNorm();
      });
    }
    Index best = 0;
    for (Index l = 1; l < opts.grid; ++l)
      if (cv_error(l) < cv_error(best)) best = l;
    out.lambda = grid(best);
    beta = run_path(full, grid, best, [](Index, const Vector&) {});
  }

  for (Index j = 0; j < p; ++j) {
    // An exact copy makes the split between the pair arbitrary; treat it as a tie.
    if ((A.col(j) - A.col(j + p)).cwiseAbs().maxCoeff() <= 1e-12) continue;
    out.W(j) = std::abs(beta(j)) - std::abs(beta(j + p));
  }
  return out;
}

WStatistics centroid_statistic(const Matrix& X, const Matrix& Xt, const Vector& labels) {
  const Index p = X.rows();
  const Index n = X.cols();
  if (Xt.rows() != p || Xt.cols() != n) throw DimensionMismatch("centroid: knockoff matrix shape differs from data");
  if (labels.size() != n) {
    throw DimensionMismatch("centroid: labels have length " + std::to_string(labels.size()) + ", expected " +
                            std::to_string(n));
  }
  Index npos = 0;
  Index nneg = 0;
  for (Index i = 0; i < n; ++i) {
    if (labels(i) == 1.0) ++npos;
    else if (labels(i) == -1.0) ++nneg;
    else throw InvalidArgument("centroid: labels must be +1 or -1");
  }
  if (npos == 0 || nneg == 0) throw InvalidArgument("centroid: both classes must be non-empty");

  const Vector pos = (labels.array() > 0.0).cast<double>().matrix();
  const Vector neg = Vector::Ones(n) - pos;
  auto fusing = [&](const Matrix& M) -> Vector {
    const Vector gap = M * pos / static_cast<double>(npos) - M * neg / static_cast<double>(nneg);
    return 0.5 * gap.cwiseAbs2();
  };
  WStatistics out;
  out.kind = StatisticKind::centroid;
  out.lambda = std::numeric_limits<double>::quiet_NaN();
  out.W = fusing(X) - fusing(Xt);
  return out;
}

Selection knockoff_threshold(const Vector& W, double q, bool plus) {
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("target FDR q must lie in (0, 1)");
  Selection sel;
  sel.q = q;
  sel.plus = plus;
  sel.threshold = std::numeric_limits<double>::infinity();

  std::vector<double> sorted(W.data(), W.data() + W.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> candidates;
  for (double w : sorted)
    if (w != 0.0) candidates.push_back(std::abs(w));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  const double offset = plus ? 1.0 : 0.0;
  for (double t : candidates) {
    const auto neg = std::upper_bound(sorted.begin(), sorted.end(), -t) - sorted.begin();
    const auto pos = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
    const double ratio = (offset + static_cast<double>(neg)) / std::max(1.0, static_cast<double>(pos));
    if (ratio <= q) {
      sel.threshold = t;
      break;
    }
  }
  for (Index j = 0; j < W.size(); ++j)
    if (W(j) >= sel.threshold) sel.selected.push_back(j);
  return sel;
}

Selection knockoff_threshold(const WStatistics& W, double q, bool plus) { return knockoff_threshold(W.W, q, plus); }

SelectionScore evaluate(const std::vector<Index>& selected, const std::vector<Index>& truth) {
  std::vector<Index> a = selected;
  std::vector<Index> b = truth;
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  std::sort(b.begin(), b.end());
  b.erase(std::unique(b.begin(), b.end()), b.end());
  std::vector<Index> hits;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(hits));
  SelectionScore score;
  const double nsel = static_cast<double>(a.size());
  const double ntrue = static_cast<double>(b.size());
  const double nhit = static_cast<double>(hits.size());
  score.fdp = (nsel - nhit) / std::max(1.0, nsel);
  score.power = nhit / std::max(1.0, ntrue);
  return score;
}

SelectionScore evaluate(const Selection& sel, const std::vector<Index>& truth) { return evaluate(sel.selected, truth); }

}  // namespace fastknock

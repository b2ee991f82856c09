#include "fastknock/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fastknock {

DataMatrix DataMatrix::standardize(const Matrix& raw) {
  const Index p = raw.rows();
  const Index n = raw.cols();
  if (n < 2) throw InvalidArgument("data needs at least 2 samples, got " + std::to_string(n));
  DataMatrix out;
  out.means = raw.rowwise().mean();
  out.X = raw.colwise() - out.means;
  out.scales = (out.X.rowwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Index i = 0; i < p; ++i) {
    const double sd = out.scales(i);
    if (!(sd > 1e-14 * (1.0 + std::abs(out.means(i))))) {
      throw DegenerateFeature(static_cast<std::size_t>(i),
                              "degenerate feature " + std::to_string(i) + ": zero sample variance");
    }
    out.X.row(i) /= sd;
  }
  return out;
}

Matrix FactorModel::dense() const {
  Matrix S = U * U.transpose();
  S.diagonal() += d;
  return S;
}

Vector FactorModel::diagonal() const { return d + U.rowwise().squaredNorm(); }

LinearOperator FactorModel::op() const {
  return [d = d, U = U](const Vector& x) -> Vector {
    Vector y = d.cwiseProduct(x);
    y.noalias() += U * (U.transpose() * x);
    return y;
  };
}

void FactorModel::validate() const {
  if (U.rows() != d.size()) throw InvalidArgument("factor model: U has " + std::to_string(U.rows()) +
                                                  " rows but d has " + std::to_string(d.size()));
  if (d.size() == 0) throw InvalidArgument("factor model: empty");
  if ((d.array() < 0.0).any()) throw InvalidArgument("factor model: negative diagonal entry");
}

Matrix empirical_correlation(const DataMatrix& data) {
  const double n = static_cast<double>(data.samples());
  Matrix S = data.X * data.X.transpose() / n;
  S.diagonal().setOnes();
  return S;
}

namespace {

double gram_frobenius2(const Matrix& X) {
  // ||X X^T||_F == ||X^T X||_F; use whichever Gram matrix is smaller.
  if (X.rows() <= X.cols()) return (X * X.transpose()).squaredNorm();
  return (X.transpose() * X).squaredNorm();
}

// What the alternating minimization needs to know about S.
struct CovarianceSource {
  Index p = 0;
  Vector diag;
  double frob2 = 0.0;
  LinearOperator apply;
  std::function<Matrix(const Matrix&)> apply_block;
  const Matrix* dense = nullptr;
};

double objective(const CovarianceSource& src, const Vector& d, const Matrix& U) {
  if (src.dense != nullptr) {
    Matrix R = *src.dense - U * U.transpose();
    R.diagonal() -= d;
    return R.squaredNorm();
  }
  const Vector row2 = U.rowwise().squaredNorm();
  const double cross = src.diag.dot(d) + (U.transpose() * src.apply_block(U)).trace();
  const double model = d.squaredNorm() + 2.0 * d.dot(row2) + (U.transpose() * U).squaredNorm();
  return std::max(0.0, src.frob2 - 2.0 * cross + model);
}

FactorFit alternating_minimization(const CovarianceSource& src, Index k, const FactorFitOptions& opts) {
  const Index p = src.p;
  if (k < 1 || k > p) throw InvalidArgument("factor model rank must satisfy 1 <= k <= p");
  if (opts.max_iters < 1) throw InvalidArgument("factor model needs at least one iteration");

  FactorFit fit;
  fit.model.d = Vector::Zero(p);
  fit.model.U = Matrix::Zero(p, k);

  // No off-diagonal mass: the diagonal model is exact.
  const double offdiag2 = src.frob2 - src.diag.squaredNorm();
  if (offdiag2 <= 1e-24 * src.frob2) {
    fit.model.d = src.diag.cwiseMax(0.0);
    fit.objective.push_back(objective(src, fit.model.d, fit.model.U));
    fit.iterations = 1;
    return fit;
  }

  Vector d = Vector::Zero(p);
  Matrix U(p, k);
  Vector prev_d;
  Matrix prev_U;
  for (int it = 0; it < opts.max_iters; ++it) {
    const LinearOperator shifted = [&src, &d](const Vector& x) -> Vector {
      return src.apply(x) - d.cwiseProduct(x);
    };
    const EigenPairs top = top_k_eigen(shifted, p, k, opts.eigen);
    U = top.vectors * top.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    d = (src.diag - U.rowwise().squaredNorm()).cwiseMax(0.0);
    const double f = objective(src, d, U);
    if (!fit.objective.empty() && f > fit.objective.back()) {
      // Rounding noise near an exact fit; keep the better iterate.
      d = prev_d;
      U = prev_U;
      break;
    }
    fit.objective.push_back(f);
    fit.iterations = it + 1;
    if (fit.objective.size() >= 2) {
      const double prev = fit.objective[fit.objective.size() - 2];
      if (prev - f < opts.rel_tol * std::max(prev, 1e-300)) break;
    }
    if (f <= 1e-30 * src.frob2) break;
    prev_d = d;
    prev_U = U;
  }
  fit.model.d = d;
  fit.model.U = U;
  return fit;
}

CovarianceSource data_source(const DataMatrix& data, double scale, double shift) {
  const Matrix& X = data.X;
  const double n = static_cast<double>(data.samples());
  CovarianceSource src;
  src.p = data.features();
  const Vector raw_diag = X.rowwise().squaredNorm() / n;
  src.diag = scale * raw_diag + Vector::Constant(src.p, shift);
  const double frob_s = gram_frobenius2(X) / (n * n);
  src.frob2 = scale * scale * frob_s + 2.0 * scale * shift * raw_diag.sum() +
              shift * shift * static_cast<double>(src.p);
  src.apply = [&X, n, scale, shift](const Vector& v) -> Vector {
    Vector y = (scale / n) * (X * (X.transpose() * v));
    if (shift != 0.0) y += shift * v;
    return y;
  };
  src.apply_block = [&X, n, scale, shift](const Matrix& B) -> Matrix {
    Matrix Y = (scale / n) * (X * (X.transpose() * B));
    if (shift != 0.0) Y += shift * B;
    return Y;
  };
  return src;
}

}  // namespace

ShrinkageEstimate ledoit_wolf(const DataMatrix& data) {
  const Matrix& X = data.X;
  const Index p = data.features();
  const double n = static_cast<double>(data.samples());
  if (data.samples() < 2) throw InvalidArgument("ledoit_wolf: need n >= 2");

  const double tr = X.squaredNorm() / n;
  const double tr2 = gram_frobenius2(X) / (n * n);
  const Vector col_norm2 = X.colwise().squaredNorm().transpose();
  const double sum_sq = col_norm2.squaredNorm();

  ShrinkageEstimate est;
  est.mu = tr / static_cast<double>(p);
  const double denom = tr2 - tr * tr / static_cast<double>(p);
  if (denom <= 1e-12) {
    est.delta = 0.0;
    est.no_shrinkage_needed = true;
    return est;
  }
  const double numer = (sum_sq - n * tr2) / (n * n);
  est.delta = std::clamp(numer / denom, 0.0, 1.0);
  return est;
}

FactorFit fit_factor_model(const Matrix& S, Index k, const FactorFitOptions& opts) {
  if (S.rows() != S.cols()) throw DimensionMismatch("fit_factor_model: covariance is not square");
  CovarianceSource src;
  src.p = S.rows();
  src.diag = S.diagonal();
  src.frob2 = S.squaredNorm();
  src.apply = [&S](const Vector& v) -> Vector { return S * v; };
  src.apply_block = [&S](const Matrix& B) -> Matrix { return S * B; };
  src.dense = &S;
  return alternating_minimization(src, k, opts);
}

FactorFit fit_factor_model(const DataMatrix& data, Index k, const FactorFitOptions& opts) {
  return alternating_minimization(data_source(data, 1.0, 0.0), k, opts);
}

FactorFit shrunk_factor_model(const DataMatrix& data, Index k, const FactorFitOptions& opts) {
  return shrunk_factor_model(data, k, ledoit_wolf(data), opts);
}

FactorFit shrunk_factor_model(const DataMatrix& data, Index k, const ShrinkageEstimate& shrink,
                              const FactorFitOptions& opts) {
  if (shrink.delta < 0.0 || shrink.delta > 1.0) throw InvalidArgument("shrinkage delta outside [0, 1]");
  FactorFit fit =
      alternating_minimization(data_source(data, 1.0 - shrink.delta, shrink.delta * shrink.mu), k, opts);
  fit.shrinkage = shrink;
  return fit;
}

}  // namespace fastknock

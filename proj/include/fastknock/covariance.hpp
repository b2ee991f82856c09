#pragma once

#include <functional>
#include <vector>

#include "fastknock/linalg.hpp"

namespace fastknock {

/// Standardized data, one row per feature and one column per sample.
struct DataMatrix {
  Matrix X;       // p x n, rows centered with unit (1/n) variance
  Vector means;   // original feature means
  Vector scales;  // original feature standard deviations

  /// Centers and scales every row of `raw` (p x n). Throws DegenerateFeature
  /// on a zero-variance row, InvalidArgument when n < 2.
  static DataMatrix standardize(const Matrix& raw);

  Index features() const { return X.rows(); }
  Index samples() const { return X.cols(); }
};

/// Sigma = diag(d) + U U^T.
struct FactorModel {
  Vector d;
  Matrix U;

  Index dim() const { return d.size(); }
  Index rank() const { return U.cols(); }
  Matrix dense() const;
  Vector diagonal() const;
  LinearOperator op() const;
  /// Throws InvalidArgument on shape mismatch or negative d.
  void validate() const;
};

struct ShrinkageEstimate {
  double delta = 0.0;  // weight of the mu * I target, in [0, 1]
  double mu = 1.0;     // average variance Tr(S) / p
  bool no_shrinkage_needed = false;
};

Matrix empirical_correlation(const DataMatrix& data);

/// Ledoit-Wolf weight toward mu I. Traces come from the smaller Gram matrix,
/// so the p x p covariance is never formed when p > n.
ShrinkageEstimate ledoit_wolf(const DataMatrix& data);

struct FactorFitOptions {
  int max_iters = 50;
  /// Stop when the relative objective decrease falls below this.
  double rel_tol = 1e-8;
  EigenOptions eigen{};
};

struct FactorFit {
  FactorModel model;
  /// ||S - D - U U^T||_F^2 after every alternating-minimization iteration.
  std::vector<double> objective;
  int iterations = 0;
  ShrinkageEstimate shrinkage{};
};

/// Alternating minimization of ||S - D - U U^T||_F^2 over diagonal D >= 0 and
/// p x k loadings U, started from D = 0.
FactorFit fit_factor_model(const Matrix& S, Index k, const FactorFitOptions& opts = {});

/// Same fit on S = X X^T / n using only products with X.
FactorFit fit_factor_model(const DataMatrix& data, Index k, const FactorFitOptions& opts = {});

/// Fit on the Ledoit-Wolf shrunk covariance (1 - delta) S + delta mu I.
FactorFit shrunk_factor_model(const DataMatrix& data, Index k, const FactorFitOptions& opts = {});
FactorFit shrunk_factor_model(const DataMatrix& data, Index k, const ShrinkageEstimate& shrink,
                              const FactorFitOptions& opts = {});

}  // namespace fastknock

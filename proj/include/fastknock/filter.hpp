#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fastknock/linalg.hpp"

namespace fastknock {

enum class StatisticKind { lcd, centroid };
std::string to_string(StatisticKind kind);
StatisticKind parse_statistic(const std::string& name);

struct WStatistics {
  Vector W;
  StatisticKind kind = StatisticKind::lcd;
  /// Lasso penalty used by lcd; NaN for centroid.
  double lambda = 0.0;
};

struct Selection {
  std::vector<Index> selected;  // ascending
  double threshold = 0.0;       // +inf when nothing qualifies
  double q = 0.1;
  bool plus = true;
};

struct LassoOptions {
  /// Stop once the duality gap is below tol * ||y||^2 / (2m).
  double tol = 1e-7;
  int max_sweeps = 100000;
};

struct LassoResult {
  Vector beta;
  double gap = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Cyclic coordinate descent on (1/2m) ||y - A beta||^2 + lambda ||beta||_1, A is m x d.
LassoResult lasso_coordinate_descent(const Matrix& A, const Vector& y, double lambda,
                                     const LassoOptions& opts = {});

struct LcdOptions {
  int folds = 5;
  int grid = 50;
  double min_ratio = 1e-3;
  /// Skip cross-validation and use this penalty.
  std::optional<double> lambda;
  LassoOptions lasso{};
};

/// Lasso coefficient difference on the design [X; Xt]^T (n x 2p); X, Xt are p x n.
WStatistics lcd_statistic(const Matrix& X, const Matrix& Xt, const Vector& y, const LcdOptions& opts = {});

/// W_j = Z_j - Z_{j+p} with Z_j = (m+_j - m-_j)^2 / 2 from the two class means.
WStatistics centroid_statistic(const Matrix& X, const Matrix& Xt, const Vector& labels);

Selection knockoff_threshold(const WStatistics& W, double q, bool plus);
Selection knockoff_threshold(const Vector& W, double q, bool plus);

struct SelectionScore {
  double fdp = 0.0;
  double power = 0.0;
};

SelectionScore evaluate(const Selection& sel, const std::vector<Index>& truth);
SelectionScore evaluate(const std::vector<Index>& selected, const std::vector<Index>& truth);

}  // namespace fastknock

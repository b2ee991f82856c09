#pragma once

#include <cstdint>
#include <vector>

#include "fastknock/covariance.hpp"
#include "fastknock/rng.hpp"

namespace fastknock {

/// Rescales D + U U^T to unit diagonal.
FactorModel normalize_to_correlation(const FactorModel& model);

/// d ~ U[0, 1], U_ij ~ N(0, 1/k), then normalized to a correlation.
FactorModel random_factor_correlation(Index p, Index k, Rng& rng);

/// Solver benchmark covariance: 1e-3 I + V diag(l) V^T with l ~ U[0, 1],
/// V_ij ~ N(0, 1), normalized to a correlation. Default k = ceil(0.05 p).
FactorModel benchmark_factor_correlation(Index p, Rng& rng, Index k = 0);

/// Columns x = sqrt(d) g1 + U g2, returned as p x n.
Matrix sample_factor_data(const FactorModel& model, Index n, Rng& rng);

struct SynthConfig {
  Index n = 1000;
  Index p = 500;
  Index k = 50;
  Index sparsity = 50;
  double amplitude = 10.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

struct SynthDataset {
  Matrix X;  // p x n
  Vector y;
  Vector beta;
  std::vector<Index> support;  // sorted
  FactorModel model;           // exact generating covariance
};

/// Linear model y = X^T beta + noise with `sparsity` coefficients of
/// magnitude amplitude / sqrt(n) and random signs.
SynthDataset synthesize(const SynthConfig& cfg);

}  // namespace fastknock

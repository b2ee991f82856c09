#pragma once

#include <cstdint>

#include "fastknock/covariance.hpp"
#include "fastknock/linalg.hpp"

namespace fastknock {

/// Conditional law of knockoffs given x for a dense covariance:
/// mean x - S Sigma^{-1} x, covariance Omega = 2S - S Sigma^{-1} S, S = diag(s).
struct KnockoffSamplerDense {
  Vector s;
  Matrix SigmaInvS;   // Sigma^{-1} diag(s)
  Matrix OmegaRoot;   // R R^T = Omega; Omega may be singular

  Index dim() const { return s.size(); }
  Vector conditional_mean(const Vector& x) const;
  /// mean(x) + OmegaRoot v.
  Vector draw(const Vector& x, const Vector& v) const;
};

/// Throws InfeasibleSampling when Omega has an eigenvalue below -1e-8.
KnockoffSamplerDense build_dense_sampler(const Matrix& Sigma, const Vector& s);

/// Omega = diag(C) + Z Z^T for Sigma = D + U U^T.
struct KnockoffSamplerFactor {
  Vector C;  // 2s - s^2 / d, entries may be negative
  Matrix Z;  // S D^{-1} U N
  Matrix N;  // lower Cholesky factor of (I + U^T D^{-1} U)^{-1}
  Vector d;
  Matrix U;
  Vector s;

  Index dim() const { return s.size(); }
  Index rank() const { return U.cols(); }
};

KnockoffSamplerFactor build_factor_sampler(const FactorModel& model, const Vector& s);

/// x - S Sigma^{-1} x in O(pk).
Vector conditional_mean_factor(const Vector& x, const KnockoffSamplerFactor& sampler);

/// L Delta L^T = diag(C) + Z Z^T where L is unit lower triangular with
/// L_ij = z_i^T b_j below the diagonal.
struct LdlFactors {
  Matrix B;      // p x k, row j is b_j
  Vector Delta;  // p, non-negative
};

/// Row-by-row emitter of (Delta_j, b_j) in O(k^2) per row.
class LdlStream {
 public:
  explicit LdlStream(Index k) : M_(Matrix::Identity(k, k)), t_(k) {}

  /// Consumes row j; writes b_j into `b` and returns Delta_j.
  /// Throws NotPositiveDefinite ("input not PSD") when Delta_j < -1e-8.
  double next(double c, const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> b);

 private:
  Matrix M_;
  Vector t_;
};

LdlFactors ldl_factorize(const Vector& C, const Matrix& Z);

/// L sqrt(Delta) v in O(pk).
Vector ldl_multiply(const Matrix& Z, const LdlFactors& F, const Vector& v);
Vector ldl_multiply(const Matrix& Z, const Matrix& B, const Vector& Delta, const Vector& v);

/// ldl_factorize and ldl_multiply fused into one pass without storing B.
Vector sample_low_rank(const Vector& C, const Matrix& Z, const Vector& v);

/// Worker threads for column sampling: hardware concurrency capped by the
/// FASTKNOCK_THREADS environment variable.
unsigned sampling_threads();

/// Knockoffs for every column of the p x n matrix X. Column i draws its noise
/// from stream i of `seed`, so the output does not depend on thread count.
Matrix sample_knockoffs(const Matrix& X, const KnockoffSamplerDense& sampler, std::uint64_t seed);
Matrix sample_knockoffs(const Matrix& X, const KnockoffSamplerFactor& sampler, std::uint64_t seed);

}  // namespace fastknock

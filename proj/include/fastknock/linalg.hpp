#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

#include "fastknock/errors.hpp"

namespace fastknock {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Symmetric matrix given only through its action y = A x.
using LinearOperator = std::function<Vector(const Vector&)>;

LinearOperator dense_operator(const Matrix& A);

/// Lower Cholesky factor L of a symmetric positive definite matrix, L L^T = A.
///
/// Always holds a strictly positive diagonal. Updates return new factors; the
/// in-place variants exist for solvers that own a factor and update it O(p)
/// times per sweep.
class LowerTriangularFactor {
 public:
  /// Throws NotPositiveDefinite when a pivot is <= 0.
  static LowerTriangularFactor factor(const Matrix& A);

  /// Adopts an existing lower-triangular matrix. Throws if a diagonal entry is not positive.
  static LowerTriangularFactor from_lower(Matrix L);

  Index dim() const { return L_.rows(); }
  const Matrix& matrix() const { return L_; }
  Matrix reconstruct() const;

  /// Returns x with L x = y.
  Vector solve(const Vector& y) const;

  /// Returns L' with L' L'^T = L L^T + sign * v v^T (sign = +1 or -1).
  LowerTriangularFactor rank_one(const Vector& v, int sign) const;

  /// In-place form of rank_one. On DowndateFailure the factor is left unchanged.
  void rank_one_in_place(Vector v, int sign);

  /// Sparse special case v = alpha * e_j, which only touches columns j..p-1.
  void rank_one_unit_in_place(Index j, double alpha, int sign);

  /// Factor of A with row and column i removed, in O((p - i)^2).
  void erase(Index i);

  /// Replaces this factor with the Cholesky factor of A, reusing storage.
  /// Throws NotPositiveDefinite, after which the factor must not be used.
  void refactor(const Matrix& A);

 private:
  explicit LowerTriangularFactor(Matrix L) : L_(std::move(L)) {}
  Matrix L_;
  // Scratch for the unit update, kept to avoid per-call allocation.
  Vector work_;
  Matrix backup_;
};

LowerTriangularFactor cholesky_factor(const Matrix& A);
LowerTriangularFactor cholesky_rank_one(const LowerTriangularFactor& L, const Vector& v, int sign);
Vector triangular_solve(const LowerTriangularFactor& L, const Vector& y);

/// Q R factors of a small k x k matrix. Q orthogonal, R upper triangular.
struct QRFactors {
  Matrix Q;
  Matrix R;

  static QRFactors decompose(const Matrix& A);
  Matrix product() const { return Q * R; }
  /// x with (Q R) x = b.
  Vector solve(const Vector& b) const;
};

/// Q'R' = QR + c z z^T by Givens rotations in O(k^2).
/// Throws SingularUpdate when some |R'_ii| < 1e-12.
QRFactors qr_rank_one(const QRFactors& F, double c, const Vector& z);
void qr_rank_one_in_place(QRFactors& F, double c, const Vector& z);

struct EigenOptions {
  /// Residual tolerance ||A v - theta v|| <= tol * max(1, |A|_est).
  double tol = 1e-10;
  /// Problems of this dimension or smaller are solved densely.
  Index dense_threshold = 64;
  /// Maximum Krylov basis size before a thick restart (0 = automatic).
  Index max_basis = 0;
  int max_restarts = 200;
  std::uint64_t seed = 0x5eed;
};

struct EigenPairs {
  Matrix vectors;  // p x k, unit columns
  Vector values;   // k, non-increasing
};

/// Smallest eigenvalue of a symmetric operator (Lanczos with full
/// reorthogonalization and thick restarts; dense for small p).
double min_eigenvalue(const LinearOperator& op, Index p, const EigenOptions& opts = {});

/// Top-k eigenpairs of a symmetric operator, eigenvalues in non-increasing order.
EigenPairs top_k_eigen(const LinearOperator& op, Index p, Index k, const EigenOptions& opts = {});

}  // namespace fastknock

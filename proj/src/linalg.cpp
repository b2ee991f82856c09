#include "fastknock/linalg.hpp"

#include <cmath>
#include <string>

namespace fastknock {

LinearOperator dense_operator(const Matrix& A) {
  return [A](const Vector& x) -> Vector { return A * x; };
}

LowerTriangularFactor LowerTriangularFactor::factor(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("cholesky_factor: matrix is not square");
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
  Matrix L = llt.matrixL();
  for (Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0.0)) throw NotPositiveDefinite();
  }
  return LowerTriangularFactor(std::move(L));
}

LowerTriangularFactor LowerTriangularFactor::from_lower(Matrix L) {
  if (L.rows() != L.cols()) throw DimensionMismatch("from_lower: matrix is not square");
  for (Index i = 0; i < L.rows(); ++i) {
    if (!(L(i, i) > 0.0)) throw NotPositiveDefinite("from_lower: non-positive diagonal entry");
  }
  L.triangularView<Eigen::StrictlyUpper>().setZero();
  return LowerTriangularFactor(std::move(L));
}

Matrix LowerTriangularFactor::reconstruct() const { return L_ * L_.transpose(); }

Vector LowerTriangularFactor::solve(const Vector& y) const {
  if (y.size() != dim()) throw DimensionMismatch("triangular_solve: dimension mismatch");
  return L_.triangularView<Eigen::Lower>().solve(y);
}

LowerTriangularFactor LowerTriangularFactor::rank_one(const Vector& v, int sign) const {
  LowerTriangularFactor out(*this);
  out.rank_one_in_place(v, sign);
  return out;
}

namespace {

// Classic chud/chdd sweep on columns [start, n). x is consumed.
// Returns false (with L partially modified) if a pivot would become <= 0.
bool rank_one_sweep(Matrix& L, Vector& x, Index start, int sign) {
  const Index n = L.rows();
  const double sgn = sign > 0 ? 1.0 : -1.0;
  for (Index k = start; k < n; ++k) {
    const double xk = x(k);
    if (xk == 0.0) continue;
    const double lkk = L(k, k);
    const double r2 = lkk * lkk + sgn * xk * xk;
    if (!(r2 > 0.0)) return false;
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = xk / lkk;
    L(k, k) = r;
    const Index m = n - k - 1;
    if (m > 0) {
      auto col = L.col(k).tail(m);
      auto xt = x.tail(m);
      col = (col + sgn * s * xt) / c;
      xt = c * xt - s * col;
    }
  }
  return true;
}

}  // namespace

void LowerTriangularFactor::rank_one_in_place(Vector v, int sign) {
  if (v.size() != dim()) throw DimensionMismatch("cholesky_rank_one: dimension mismatch");
  if (sign != 1 && sign != -1) throw InvalidArgument("cholesky_rank_one: sign must be +1 or -1");
  if (sign > 0) {
    rank_one_sweep(L_, v, 0, sign);
    return;
  }
  Matrix backup = L_;
  if (!rank_one_sweep(L_, v, 0, sign)) {
    L_ = std::move(backup);
    throw DowndateFailure();
  }
}

void LowerTriangularFactor::rank_one_unit_in_place(Index j, double alpha, int sign) {
  const Index n = dim();
  if (j < 0 || j >= n) throw DimensionMismatch("rank_one_unit_in_place: index out of range");
  if (alpha == 0.0) return;
  work_.setZero(n);
  work_(j) = alpha;
  if (sign > 0) {
    rank_one_sweep(L_, work_, j, sign);
    return;
  }
  const Index m = n - j;
  if (backup_.rows() != n) backup_.resize(n, n);
  backup_.bottomRightCorner(m, m) = L_.bottomRightCorner(m, m);
  if (!rank_one_sweep(L_, work_, j, sign)) {
    L_.bottomRightCorner(m, m) = backup_.bottomRightCorner(m, m);
    throw DowndateFailure();
  }
}

void LowerTriangularFactor::erase(Index i) {
  const Index n = dim();
  if (i < 0 || i >= n) throw DimensionMismatch("erase: index out of range");
  const Index m = n - i - 1;
  // Dropping row and column i leaves the trailing block short by l l^T, where l
  // is the part of column i below the diagonal.
  work_.setZero(n - 1);
  work_.tail(m) = L_.col(i).tail(m);
  Matrix L(n - 1, n - 1);
  L.topLeftCorner(i, i) = L_.topLeftCorner(i, i);
  L.topRightCorner(i, m).setZero();
  L.bottomLeftCorner(m, i) = L_.bottomLeftCorner(m, i);
  L.bottomRightCorner(m, m) = L_.bottomRightCorner(m, m);
  L_ = std::move(L);
  rank_one_sweep(L_, work_, i, 1);
}

void LowerTriangularFactor::refactor(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("refactor: matrix is not square");
  L_ = A;
  Eigen::LLT<Eigen::Ref<Matrix>> llt(L_);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite();
  L_.triangularView<Eigen::StrictlyUpper>().setZero();
  for (Index i = 0; i < L_.rows(); ++i) {
    if (!(L_(i, i) > 0.0)) throw NotPositiveDefinite();
  }
}

LowerTriangularFactor cholesky_factor(const Matrix& A) { return LowerTriangularFactor::factor(A); }

LowerTriangularFactor cholesky_rank_one(const LowerTriangularFactor& L, const Vector& v, int sign) {
  return L.rank_one(v, sign);
}

Vector triangular_solve(const LowerTriangularFactor& L, const Vector& y) { return L.solve(y); }

// ---------------------------------------------------------------------------
// QR

QRFactors QRFactors::decompose(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionMismatch("QR: matrix is not square");
  Eigen::HouseholderQR<Matrix> qr(A);
  QRFactors F;
  F.Q = qr.householderQ();
  F.R = qr.matrixQR().triangularView<Eigen::Upper>();
  return F;
}

Vector QRFactors::solve(const Vector& b) const {
  return R.triangularView<Eigen::Upper>().solve(Q.transpose() * b);
}

namespace {

struct Givens {
  double c;
  double s;
};

// Rotation G with G [a; b] = [r; 0].
Givens make_givens(double a, double b) {
  if (b == 0.0) return {1.0, 0.0};
  const double r = std::hypot(a, b);
  return {a / r, b / r};
}

// Rows (i, i+1) of R from column `from` onward, columns (i, i+1) of Q.
void apply_givens(QRFactors& F, Index i, const Givens& g, Index from) {
  const Index k = F.R.cols();
  for (Index col = from; col < k; ++col) {
    const double a = F.R(i, col);
    const double b = F.R(i + 1, col);
    F.R(i, col) = g.c * a + g.s * b;
    F.R(i + 1, col) = -g.s * a + g.c * b;
  }
  for (Index row = 0; row < k; ++row) {
    const double a = F.Q(row, i);
    const double b = F.Q(row, i + 1);
    F.Q(row, i) = g.c * a + g.s * b;
    F.Q(row, i + 1) = -g.s * a + g.c * b;
  }
}

}  // namespace

void qr_rank_one_in_place(QRFactors& F, double c, const Vector& z) {
  const Index k = F.R.rows();
  if (z.size() != k || F.Q.rows() != k) throw DimensionMismatch("qr_rank_one: dimension mismatch");
  // QR + c z z^T = Q (R + w z^T), w = c Q^T z.
  Vector w = c * (F.Q.transpose() * z);
  for (Index i = k - 1; i > 0; --i) {
    const Givens g = make_givens(w(i - 1), w(i));
    const double a = w(i - 1);
    const double b = w(i);
    w(i - 1) = g.c * a + g.s * b;
    w(i) = 0.0;
    apply_givens(F, i - 1, g, i - 1);
  }
  F.R.row(0) += w(0) * z.transpose();
  for (Index i = 0; i + 1 < k; ++i) {
    const Givens g = make_givens(F.R(i, i), F.R(i + 1, i));
    apply_givens(F, i, g, i);
    F.R(i + 1, i) = 0.0;
  }
  for (Index i = 0; i < k; ++i) {
    if (std::abs(F.R(i, i)) < 1e-12) throw SingularUpdate();
  }
}

QRFactors qr_rank_one(const QRFactors& F, double c, const Vector& z) {
  QRFactors out = F;
  qr_rank_one_in_place(out, c, z);
  return out;
}

}  // namespace fastknock

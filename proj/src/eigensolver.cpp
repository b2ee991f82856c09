// Extreme eigenpairs of symmetric operators: Lanczos with full
// reorthogonalization and thick restarts, dense fallback for small problems.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fastknock/linalg.hpp"

namespace fastknock {

namespace {

enum class Which { largest, smallest };

Vector random_unit(Index p, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Vector v(p);
  for (Index i = 0; i < p; ++i) v(i) = normal(gen);
  return v / v.norm();
}

EigenPairs dense_pairs(const LinearOperator& op, Index p, Index k, Which which) {
  Matrix A(p, p);
  Vector e = Vector::Zero(p);
  for (Index i = 0; i < p; ++i) {
    e(i) = 1.0;
    A.col(i) = op(e);
    e(i) = 0.0;
  }
  const Matrix S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  if (es.info() != Eigen::Success) throw NotConverged();
  EigenPairs out;
  out.vectors.resize(p, k);
  out.values.resize(k);
  for (Index i = 0; i < k; ++i) {
    const Index idx = which == Which::largest ? p - 1 - i : i;
    out.values(i) = es.eigenvalues()(idx);
    out.vectors.col(i) = es.eigenvectors().col(idx);
  }
  return out;
}

// Orthogonalizes v against the first `cols` columns of V (classical Gram-Schmidt, twice).
double orthogonalize(const Matrix& V, Index cols, Vector& v) {
  if (cols == 0) return v.norm();
  for (int pass = 0; pass < 2; ++pass) {
    const Vector h = V.leftCols(cols).transpose() * v;
    v.noalias() -= V.leftCols(cols) * h;
  }
  return v.norm();
}

EigenPairs iterative_pairs(const LinearOperator& op, Index p, Index k, Which which,
                           const EigenOptions& opts) {
  std::mt19937_64 gen(opts.seed);
  const Index m_max = opts.max_basis > 0
                          ? std::min(p, std::max(opts.max_basis, k + 2))
                          : std::min(p, std::max<Index>(3 * k + 30, 80));
  const Index keep = std::min(m_max - 1, k + std::max<Index>(k, 10));

  Matrix V(p, m_max);
  Matrix AV(p, m_max);
  Index cur = 0;
  Vector next = random_unit(p, gen);

  int restarts = 0;
  for (;;) {
    bool check_now = false;
    while (cur < m_max) {
      const double before = next.norm();
      double nrm = orthogonalize(V, cur, next);
      if (!(nrm > 1e-10 * std::max(before, 1e-300))) {
        // Krylov space became invariant; continue with a fresh direction.
        next = random_unit(p, gen);
        nrm = orthogonalize(V, cur, next);
        if (!(nrm > 1e-12)) break;
      }
      V.col(cur) = next / nrm;
      AV.col(cur) = op(V.col(cur));
      ++cur;
      next = AV.col(cur - 1);
      if (cur >= k + 1 && (cur % 10 == 0 || cur == m_max || cur == p)) {
        check_now = true;
        break;
      }
    }
    if (!check_now && cur < k) throw NotConverged("eigensolver not converged: basis collapsed");

    // Rayleigh-Ritz on the current basis.
    const Matrix H0 = V.leftCols(cur).transpose() * AV.leftCols(cur);
    const Matrix H = 0.5 * (H0 + H0.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(H);
    if (es.info() != Eigen::Success) throw NotConverged();
    const Vector& theta = es.eigenvalues();
    const double scale = std::max(1.0, theta.cwiseAbs().maxCoeff());
    auto wanted = [&](Index i) { return which == Which::largest ? cur - 1 - i : i; };

    const Index nk = std::min(k, cur);
    EigenPairs out;
    out.vectors.resize(p, nk);
    out.values.resize(nk);
    Index first_unconverged = -1;
    Vector first_residual;
    for (Index i = 0; i < nk; ++i) {
      const Index idx = wanted(i);
      const Vector sv = es.eigenvectors().col(idx);
      Vector y = V.leftCols(cur) * sv;
      const Vector r = AV.leftCols(cur) * sv - theta(idx) * y;
      out.values(i) = theta(idx);
      out.vectors.col(i) = y;
      if (first_unconverged < 0 && r.norm() > opts.tol * scale) {
        first_unconverged = i;
        first_residual = r;
      }
    }
    if (first_unconverged < 0 && nk == k) return out;
    if (cur == p) return out;  // the basis spans the whole space: Ritz pairs are exact
    if (cur < m_max) continue;

    // Thick restart: keep the wanted end of the Ritz spectrum.
    if (++restarts > opts.max_restarts) throw NotConverged();
    const Index l = std::min(keep, cur - 1);
    Matrix S(cur, l);
    for (Index i = 0; i < l; ++i) S.col(i) = es.eigenvectors().col(wanted(i));
    const Matrix newV = V.leftCols(cur) * S;
    const Matrix newAV = AV.leftCols(cur) * S;
    V.leftCols(l) = newV;
    AV.leftCols(l) = newAV;
    cur = l;
    next = first_residual.size() == p ? first_residual : Vector(random_unit(p, gen));
  }
}

EigenPairs extreme_pairs(const LinearOperator& op, Index p, Index k, Which which,
                         const EigenOptions& opts) {
  if (p < 1) throw InvalidArgument("eigensolver: empty operator");
  if (k < 1 || k > p) throw InvalidArgument("eigensolver: need 1 <= k <= p");
  if (p <= opts.dense_threshold) return dense_pairs(op, p, k, which);
  return iterative_pairs(op, p, k, which, opts);
}

}  // namespace

double min_eigenvalue(const LinearOperator& op, Index p, const EigenOptions& opts) {
  return extreme_pairs(op, p, 1, Which::smallest, opts).values(0);
}

EigenPairs top_k_eigen(const LinearOperator& op, Index p, Index k, const EigenOptions& opts) {
  return extreme_pairs(op, p, k, Which::largest, opts);
}

}  // namespace fastknock

#include "fastknock/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "fastknock/rng.hpp"

namespace fastknock {

namespace {

constexpr double kZeroPivot = 1e-12;
constexpr double kNegativePivot = -1e-8;

void check_s(const Vector& s, Index p) {
  if (s.size() != p) {
    throw DimensionMismatch("s has length " + std::to_string(s.size()) + ", expected " + std::to_string(p));
  }
  if ((s.array() < 0.0).any()) throw InvalidArgument("s must be non-negative");
}

template <class ColumnFn>
void for_each_column(Index n, ColumnFn&& fn) {
  const unsigned threads = std::min<unsigned>(sampling_threads(), static_cast<unsigned>(std::max<Index>(n, 1)));
  if (threads <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (Index i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Vector KnockoffSamplerDense::conditional_mean(const Vector& x) const {
  return x - SigmaInvS.transpose() * x;
}

Vector KnockoffSamplerDense::draw(const Vector& x, const Vector& v) const {
  return conditional_mean(x) + OmegaRoot * v;
}

KnockoffSamplerDense build_dense_sampler(const Matrix& Sigma, const Vector& s) {
  const Index p = Sigma.rows();
  if (Sigma.cols() != p) throw DimensionMismatch("covariance is not square");
  check_s(s, p);
  Eigen::LLT<Matrix> llt(Sigma);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");

  KnockoffSamplerDense out;
  out.s = s;
  out.SigmaInvS = llt.solve(Matrix(s.asDiagonal()));
  Matrix Omega = -(s.asDiagonal() * out.SigmaInvS);
  Omega.diagonal() += 2.0 * s;
  Omega = 0.5 * (Omega + Omega.transpose()).eval();

  Eigen::LDLT<Matrix> ldlt(Omega);
  if (ldlt.info() != Eigen::Success) throw InfeasibleSampling("infeasible s for sampling: Omega factorization failed");
  Vector D = ldlt.vectorD();
  const double floor = kNegativePivot * std::max(1.0, Omega.diagonal().cwiseAbs().maxCoeff());
  if (p > 0 && D.minCoeff() < floor) {
    throw InfeasibleSampling("infeasible s for sampling: 2S - S Sigma^{-1} S is not PSD (min pivot " +
                             std::to_string(D.minCoeff()) + "); rescale s with the hybrid solver");
  }
  D = D.cwiseMax(0.0);
  Matrix L = ldlt.matrixL();
  L = L * D.cwiseSqrt().asDiagonal();
  out.OmegaRoot = ldlt.transpositionsP().transpose() * L;
  return out;
}

KnockoffSamplerFactor build_factor_sampler(const FactorModel& model, const Vector& s) {
  model.validate();
  const Index p = model.dim();
  const Index k = model.rank();
  check_s(s, p);
  if ((model.d.array() <= 0.0).any()) throw InvalidArgument("factor sampler needs d > 0 elementwise");

  KnockoffSamplerFactor out;
  out.d = model.d;
  out.U = model.U;
  out.s = s;
  const Vector dinv = model.d.cwiseInverse();
  Matrix G = Matrix::Identity(k, k);
  G.noalias() += model.U.transpose() * dinv.asDiagonal() * model.U;
  Eigen::LLT<Matrix> gram(G);
  if (gram.info() != Eigen::Success) throw NotPositiveDefinite("factor sampler: I + U^T D^{-1} U is not positive definite");
  Matrix Ginv = gram.solve(Matrix::Identity(k, k));
  Ginv = 0.5 * (Ginv + Ginv.transpose()).eval();
  Eigen::LLT<Matrix> root(Ginv);
  if (root.info() != Eigen::Success) throw NotPositiveDefinite("factor sampler: Gram inverse is not positive definite");
  out.N = root.matrixL();

  const Vector sd = s.cwiseProduct(dinv);
  out.C = 2.0 * s - s.cwiseProduct(sd);
  out.Z = sd.asDiagonal() * model.U * out.N;
  return out;
}

Vector conditional_mean_factor(const Vector& x, const KnockoffSamplerFactor& f) {
  if (x.size() != f.dim()) throw DimensionMismatch("conditional_mean_factor: x has the wrong length");
  const Vector dx = x.cwiseQuotient(f.d);
  const Vector inner = f.N.transpose() * (f.U.transpose() * dx);
  return x - f.s.cwiseProduct(dx) + f.Z * inner;
}

double LdlStream::next(double c, const Eigen::Ref<const Vector>& z, Eigen::Ref<Vector> b) {
  t_.noalias() = M_ * z;
  const double delta = c + z.dot(t_);
  if (delta < kNegativePivot) {
    throw NotPositiveDefinite("input not PSD: pivot " + std::to_string(delta) + " in LDL factorization");
  }
  if (delta <= kZeroPivot) {
    b.setZero();
    return 0.0;
  }
  b = t_ / delta;
  M_.noalias() -= t_ * b.transpose();
  return delta;
}

LdlFactors ldl_factorize(const Vector& C, const Matrix& Z) {
  const Index p = C.size();
  const Index k = Z.cols();
  if (Z.rows() != p) throw DimensionMismatch("ldl_factorize: C and Z disagree on p");
  LdlFactors F;
  F.B.resize(p, k);
  F.Delta.resize(p);
  // Column-major copies keep each row contiguous.
  const Matrix Zt = Z.transpose();
  Matrix Bt(k, p);
  LdlStream stream(k);
  for (Index j = 0; j < p; ++j) F.Delta(j) = stream.next(C(j), Zt.col(j), Bt.col(j));
  F.B = Bt.transpose();
  return F;
}

Vector ldl_multiply(const Matrix& Z, const Matrix& B, const Vector& Delta, const Vector& v) {
  const Index p = Z.rows();
  const Index k = Z.cols();
  if (B.rows() != p || B.cols() != k || Delta.size() != p || v.size() != p) {
    throw DimensionMismatch("ldl_multiply: shapes disagree");
  }
  Vector u(p);
  Vector w = Vector::Zero(k);
  for (Index j = 0; j < p; ++j) {
    const double a = std::sqrt(Delta(j)) * v(j);
    u(j) = a + Z.row(j).dot(w);
    w.noalias() += a * B.row(j).transpose();
  }
  return u;
}

Vector ldl_multiply(const Matrix& Z, const LdlFactors& F, const Vector& v) {
  return ldl_multiply(Z, F.B, F.Delta, v);
}

Vector sample_low_rank(const Vector& C, const Matrix& Z, const Vector& v) {
  const Index p = C.size();
  const Index k = Z.cols();
  if (Z.rows() != p || v.size() != p) throw DimensionMismatch("sample_low_rank: shapes disagree");
  const Matrix Zt = Z.transpose();
  LdlStream stream(k);
  Vector b(k);
  Vector w = Vector::Zero(k);
  Vector u(p);
  for (Index j = 0; j < p; ++j) {
    const double delta = stream.next(C(j), Zt.col(j), b);
    const double a = std::sqrt(delta) * v(j);
    u(j) = a + Zt.col(j).dot(w);
    w.noalias() += a * b;
  }
  return u;
}

unsigned sampling_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FASTKNOCK_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

Matrix sample_knockoffs(const Matrix& X, const KnockoffSamplerDense& sampler, std::uint64_t seed) {
  const Index p = sampler.dim();
  if (X.rows() != p) throw DimensionMismatch("sample_knockoffs: data has " + std::to_string(X.rows()) +
                                             " features, sampler has " + std::to_string(p));
  Matrix out(p, X.cols());
  for_each_column(X.cols(), [&](Index i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    out.col(i) = sampler.draw(X.col(i), rng.normal_vector(p));
  });
  return out;
}

Matrix sample_knockoffs(const Matrix& X, const KnockoffSamplerFactor& sampler, std::uint64_t seed) {
  const Index p = sampler.dim();
  if (X.rows() != p) throw DimensionMismatch("sample_knockoffs: data has " + std::to_string(X.rows()) +
                                             " features, sampler has " + std::to_string(p));
  const LdlFactors F = ldl_factorize(sampler.C, sampler.Z);
  Matrix out(p, X.cols());
  for_each_column(X.cols(), [&](Index i) {
    Rng rng(seed, static_cast<std::uint64_t>(i));
    out.col(i) = conditional_mean_factor(X.col(i), sampler) + ldl_multiply(sampler.Z, F, rng.normal_vector(p));
  });
  return out;
}

}  // namespace fastknock

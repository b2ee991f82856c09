#include <cmath>

#include "doctest.h"
#include "fastknock/linalg.hpp"
#include "support/oracles.hpp"

using namespace fastknock;

TEST_CASE("cholesky factor of a small matrix") {
  Matrix A(2, 2);
  A << 4, 2, 2, 5;
  const auto L = LowerTriangularFactor::factor(A);
  Matrix expect(2, 2);
  expect << 2, 0, 1, 2;
  CHECK((L.matrix() - expect).norm() < 1e-14);
  CHECK((L.reconstruct() - A).norm() < 1e-14);
}

TEST_CASE("cholesky rejects indefinite input") {
  Matrix A(2, 2);
  A << 1, 2, 2, 1;
  CHECK_THROWS_AS(LowerTriangularFactor::factor(A), NotPositiveDefinite);
  CHECK_THROWS_AS(LowerTriangularFactor::from_lower(Matrix::Zero(2, 2)), NotPositiveDefinite);
}

TEST_CASE("rank-one update of the identity") {
  const auto I = LowerTriangularFactor::factor(Matrix::Identity(2, 2));
  const auto L = I.rank_one(Vector::Unit(2, 0), +1);
  CHECK(L.matrix()(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(L.matrix()(1, 1) == doctest::Approx(1.0));
  CHECK(L.matrix()(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("downdate past definiteness fails and leaves the factor unchanged") {
  auto L = LowerTriangularFactor::factor(Matrix::Identity(3, 3));
  const Matrix before = L.matrix();
  CHECK_THROWS_AS(L.rank_one_in_place(Vector::Constant(3, 1.0), -1), DowndateFailure);
  CHECK(L.matrix() == before);
  CHECK_THROWS_AS(L.rank_one_unit_in_place(1, 1.0, -1), DowndateFailure);
  CHECK(L.matrix() == before);
}

TEST_CASE("rank-one updates match dense reconstruction") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const Index p = 1 + rng.index(60);
    const Matrix A = oracle::random_spd(p, rng);
    const Vector v = rng.normal_vector(p);
    const auto L = LowerTriangularFactor::factor(A);
    CHECK((L.rank_one(v, +1).reconstruct() - (A + v * v.transpose())).norm() <= 1e-9 * A.norm());
    const Vector w = 0.3 * v / std::sqrt(v.dot(A.inverse() * v));
    CHECK((L.rank_one(w, -1).reconstruct() - (A - w * w.transpose())).norm() <= 1e-9 * A.norm());

    const Index j = rng.index(p);
    auto U = L;
    U.rank_one_unit_in_place(j, 0.7, +1);
    Matrix E = A;
    E(j, j) += 0.49;
    CHECK((U.reconstruct() - E).norm() <= 1e-9 * A.norm());
  }
}

TEST_CASE("erasing rows and columns matches refactoring the submatrix") {
  Rng rng(12);
  for (int t = 0; t < 10; ++t) {
    const Index p = 2 + rng.index(40);
    Matrix A = oracle::random_spd(p, rng);
    auto L = LowerTriangularFactor::factor(A);
    while (L.dim() > 1) {
      const Index i = rng.index(L.dim());
      L.erase(i);
      const Index m = A.rows() - 1;
      Matrix B(m, m);
      for (Index r = 0, rr = 0; r < A.rows(); ++r) {
        if (r == i) continue;
        for (Index c = 0, cc = 0; c < A.cols(); ++c) {
          if (c == i) continue;
          B(rr, cc++) = A(r, c);
        }
        ++rr;
      }
      A = B;
      CHECK((L.reconstruct() - A).norm() <= 1e-10 * A.norm());
      CHECK((L.matrix().triangularView<Eigen::StrictlyUpper>().toDenseMatrix()).norm() == 0.0);
    }
  }
  auto L = LowerTriangularFactor::factor(Matrix::Identity(3, 3));
  CHECK_THROWS_AS(L.erase(3), DimensionMismatch);
}

TEST_CASE("triangular solve") {
  Matrix Lm(2, 2);
  Lm << 2, 0, 1, 2;
  const auto L = LowerTriangularFactor::from_lower(Lm);
  Vector rhs(2);
  rhs << 2, 3;
  const Vector x = L.solve(rhs);
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(1.0));

  const auto I = LowerTriangularFactor::factor(Matrix::Identity(4, 4));
  const Vector y = Vector::LinSpaced(4, -1, 2);
  CHECK(I.solve(y) == y);

  Rng rng(3);
  const auto R = LowerTriangularFactor::factor(oracle::random_spd(50, rng));
  const Vector b = rng.normal_vector(50);
  CHECK((R.matrix() * R.solve(b) - b).norm() <= 1e-10 * b.norm());
}

TEST_CASE("qr rank-one update") {
  const auto F = QRFactors::decompose(Matrix::Identity(2, 2));
  const auto G = qr_rank_one(F, 1.0, Vector::Unit(2, 0));
  Matrix expect = Matrix::Identity(2, 2);
  expect(0, 0) = 2.0;
  CHECK((G.product() - expect).norm() < 1e-14);
  CHECK((G.Q.transpose() * G.Q - Matrix::Identity(2, 2)).norm() < 1e-14);
  CHECK(std::abs(G.R(1, 0)) < 1e-15);

  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Index k = 1 + rng.index(15);
    Matrix A = rng.normal_matrix(k, k);
    A.diagonal().array() += 3.0;
    const auto H = QRFactors::decompose(A);
    const Vector z = rng.normal_vector(k);
    const double c = rng.normal();
    const auto K = qr_rank_one(H, c, z);
    CHECK((K.product() - (A + c * z * z.transpose())).norm() <= 1e-8 * (1.0 + A.norm()));
    CHECK((K.Q.transpose() * K.Q - Matrix::Identity(k, k)).norm() <= 1e-12);
    CHECK((K.R.triangularView<Eigen::StrictlyLower>().toDenseMatrix()).norm() == 0.0);
    CHECK((qr_rank_one(K, -c, z).product() - A).norm() <= 1e-8 * A.norm());
    const Vector b = rng.normal_vector(k);
    CHECK((A * H.solve(b) - b).norm() <= 1e-10 * (1.0 + b.norm()) * A.norm());
  }
}

TEST_CASE("qr update to a singular matrix is reported") {
  const auto F = QRFactors::decompose(Matrix::Identity(2, 2));
  CHECK_THROWS_AS(qr_rank_one(F, -1.0, Vector::Unit(2, 1)), SingularUpdate);
}

TEST_CASE("min eigenvalue") {
  Vector d(3);
  d << 1, 2, 5;
  const Matrix D = d.asDiagonal();
  CHECK(min_eigenvalue(dense_operator(D), 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(min_eigenvalue(dense_operator(oracle::equicorrelated(10, 0.8)), 10) ==
        doctest::Approx(0.2).epsilon(1e-10));

  Rng rng(7);
  const Matrix S = oracle::random_symmetric(20, rng);
  CHECK(std::abs(min_eigenvalue(dense_operator(S), 20) - oracle::dense_min_eig(S)) <= 1e-8);
}

TEST_CASE("lanczos path matches the dense spectrum") {
  Rng rng(8);
  for (const Index p : {65, 150, 400}) {
    const Matrix S = oracle::random_symmetric(p, rng);
    const double lm = min_eigenvalue(dense_operator(S), p);
    CHECK(std::abs(lm - oracle::dense_min_eig(S)) <= 1e-8 * (1.0 + std::abs(lm)));
    CHECK(lm <= S.diagonal().minCoeff());

    const auto top = top_k_eigen(dense_operator(S), p, 5);
    Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    for (Index i = 0; i < 5; ++i) {
      CHECK(std::abs(top.values(i) - es.eigenvalues()(p - 1 - i)) <= 1e-6 * S.norm());
      CHECK((S * top.vectors.col(i) - top.values(i) * top.vectors.col(i)).norm() <= 1e-6 * S.norm());
    }
  }
  // Operator given only as a matvec: equicorrelated at large p.
  const Index p = 2000;
  const LinearOperator equi = [p](const Vector& x) { return Vector(0.2 * x.array() + 0.8 * x.sum()); };
  CHECK(min_eigenvalue(equi, p) == doctest::Approx(0.2).epsilon(1e-8));
  const auto top = top_k_eigen(equi, p, 1);
  CHECK(top.values(0) == doctest::Approx(0.2 + 0.8 * p).epsilon(1e-10));
}

TEST_CASE("top eigenpairs") {
  Vector d(3);
  d << 3, 2, 1;
  const auto E = top_k_eigen(dense_operator(d.asDiagonal().toDenseMatrix()), 3, 2);
  CHECK(E.values(0) == doctest::Approx(3.0));
  CHECK(E.values(1) == doctest::Approx(2.0));
  CHECK(std::abs(std::abs(E.vectors(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(E.vectors(1, 1)) - 1.0) < 1e-12);

  Vector u(4);
  u << 1, -2, 0.5, 3;
  const auto R = top_k_eigen(dense_operator(u * u.transpose()), 4, 1);
  CHECK(R.values(0) == doctest::Approx(u.squaredNorm()));
  CHECK(std::abs(std::abs(R.vectors.col(0).dot(u.normalized())) - 1.0) < 1e-12);

  Rng rng(9);
  const Matrix S = oracle::random_symmetric(30, rng);
  const auto T = top_k_eigen(dense_operator(S), 30, 5);
  Eigen::SelfAdjointEigenSolver<Matrix> es(S);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(T.values(i) - es.eigenvalues()(29 - i)) <= 1e-6);
    if (i > 0) CHECK(T.values(i) <= T.values(i - 1));
  }
}

TEST_CASE("rayleigh bound on random symmetric matrices") {
  Rng rng(10);
  for (int t = 0; t < 30; ++t) {
    const Index p = 2 + rng.index(100);
    const Matrix S = oracle::random_symmetric(p, rng);
    CHECK(min_eigenvalue(dense_operator(S), p) <= S.diagonal().minCoeff() + 1e-12);
  }
}

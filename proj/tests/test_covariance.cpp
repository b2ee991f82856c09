#include <cmath>

#include "doctest.h"
#include "fastknock/covariance.hpp"
#include "fastknock/synth.hpp"
#include "support/oracles.hpp"

using namespace fastknock;

namespace {

double residual(const Matrix& S, const FactorModel& m) { return (S - m.dense()).norm(); }

void check_non_increasing(const std::vector<double>& obj) {
  for (std::size_t i = 1; i < obj.size(); ++i) CHECK(obj[i] <= obj[i - 1] * (1.0 + 1e-12) + 1e-300);
}

}  // namespace

TEST_CASE("standardize") {
  Matrix raw(2, 4);
  raw << 1, 2, 3, 4, 10, 10, 10, 12;
  const auto D = DataMatrix::standardize(raw);
  CHECK(D.means(0) == doctest::Approx(2.5));
  CHECK(D.X.rowwise().mean().cwiseAbs().maxCoeff() < 1e-15);
  CHECK((D.X.rowwise().squaredNorm() / 4.0).isApprox(Vector::Ones(2).transpose(), 1e-14));

  Matrix flat = raw;
  flat.row(1).setConstant(3.0);
  try {
    DataMatrix::standardize(flat);
    FAIL("expected DegenerateFeature");
  } catch (const DegenerateFeature& e) {
    CHECK(e.index() == 1);
  }
  CHECK_THROWS_AS(DataMatrix::standardize(Matrix::Ones(2, 1)), InvalidArgument);
}

TEST_CASE("empirical correlation") {
  // Rows orthogonal after centering.
  Matrix raw(2, 4);
  raw << 1, -1, 1, -1, 1, 1, -1, -1;
  CHECK(empirical_correlation(DataMatrix::standardize(raw)).isApprox(Matrix::Identity(2, 2), 1e-14));

  Matrix twin(2, 5);
  twin << 1, 4, 2, 8, 5, 1, 4, 2, 8, 5;
  CHECK(empirical_correlation(DataMatrix::standardize(twin))(0, 1) == doctest::Approx(1.0).epsilon(1e-14));

  Rng rng(41);
  const Matrix X = rng.normal_matrix(5, 1000);
  const Matrix C = empirical_correlation(DataMatrix::standardize(X));
  // Two-pass oracle: means first, then centered cross products.
  for (Index a = 0; a < 5; ++a)
    for (Index b = 0; b < 5; ++b) {
      const Vector xa = X.row(a).transpose().array() - X.row(a).mean();
      const Vector xb = X.row(b).transpose().array() - X.row(b).mean();
      CHECK(std::abs(C(a, b) - xa.dot(xb) / (xa.norm() * xb.norm())) <= 1e-12);
    }
}

TEST_CASE("ledoit-wolf") {
  // Empirical covariance exactly the identity: rows are scaled orthogonal +-1 patterns.
  Matrix H(4, 8);
  H << 1, 1, 1, 1, -1, -1, -1, -1,
       1, 1, -1, -1, 1, 1, -1, -1,
       1, -1, 1, -1, 1, -1, 1, -1,
       1, -1, -1, 1, 1, -1, -1, 1;
  const auto flagged = ledoit_wolf(DataMatrix::standardize(H));
  CHECK(flagged.delta == 0.0);
  CHECK(flagged.no_shrinkage_needed);

  Rng rng(42);
  const FactorModel m = random_factor_correlation(10, 2, rng);
  const auto big = ledoit_wolf(DataMatrix::standardize(sample_factor_data(m, 100000, rng)));
  CHECK(big.delta < 0.01);
  CHECK(big.delta >= 0.0);

  const auto small = DataMatrix::standardize(rng.normal_matrix(50, 10));
  const auto est = ledoit_wolf(small);
  CHECK(est.delta > 0.0);
  CHECK(est.delta <= 1.0);
  const Matrix S = small.X * small.X.transpose() / 10.0;
  Matrix shrunk = (1.0 - est.delta) * S;
  shrunk.diagonal().array() += est.delta * est.mu;
  Eigen::SelfAdjointEigenSolver<Matrix> a(S), b(shrunk);
  const double cond_s = a.eigenvalues().maxCoeff() / std::max(a.eigenvalues().minCoeff(), 1e-300);
  const double cond_b = b.eigenvalues().maxCoeff() / b.eigenvalues().minCoeff();
  CHECK(cond_b < cond_s);
}

TEST_CASE("factor fit on the identity") {
  const auto fit = fit_factor_model(Matrix::Identity(6, 6), 1);
  CHECK((fit.model.d.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(fit.model.U.norm() < 1e-10);
}

TEST_CASE("full-rank factor fit is exact") {
  Rng rng(43);
  const Matrix S = oracle::random_spd(12, rng);
  const auto fit = fit_factor_model(S, 12);
  CHECK(residual(S, fit.model) <= 1e-8);
  check_non_increasing(fit.objective);
}

TEST_CASE("planted factor model is recovered") {
  Rng rng(44);
  const FactorModel planted = oracle::planted_model(50, 5, rng);
  const Matrix S = planted.dense();
  FactorFitOptions opts;
  opts.max_iters = 20;
  opts.rel_tol = 0.0;
  const auto fit = fit_factor_model(S, 5, opts);
  CHECK(fit.objective.back() <= 1e-6);
  check_non_increasing(fit.objective);
  CHECK(oracle::dense_min_eig(fit.model.dense()) >= -1e-10);
  CHECK(fit.model.d.minCoeff() >= 0.0);
}

TEST_CASE("matrix-free and dense fits agree") {
  Rng rng(45);
  for (const Index p : {30, 120}) {
    const FactorModel m = random_factor_correlation(p, 3, rng);
    const DataMatrix data = DataMatrix::standardize(sample_factor_data(m, 400, rng));
    const Matrix S = data.X * data.X.transpose() / 400.0;
    const auto a = fit_factor_model(S, 3);
    const auto b = fit_factor_model(data, 3);
    CHECK((a.model.dense() - b.model.dense()).norm() <= 1e-6);
    check_non_increasing(b.objective);
    CHECK(b.objective.size() == a.objective.size());
  }
}

TEST_CASE("shrunk factor model") {
  Rng rng(46);
  const DataMatrix data = DataMatrix::standardize(rng.normal_matrix(100, 30));
  const auto fit = shrunk_factor_model(data, 10);
  CHECK(fit.shrinkage.delta > 0.0);
  CHECK(min_eigenvalue(fit.model.op(), 100) > 0.0);

  ShrinkageEstimate none;
  none.delta = 0.0;
  none.mu = 1.0;
  const auto plain = fit_factor_model(data, 4);
  const auto same = shrunk_factor_model(data, 4, none);
  CHECK((plain.model.dense() - same.model.dense()).norm() <= 1e-10);

  ShrinkageEstimate all;
  all.delta = 1.0;
  all.mu = 1.0;
  const auto id = shrunk_factor_model(data, 4, all);
  CHECK((id.model.d.array() - 1.0).abs().maxCoeff() < 1e-10);
  CHECK(id.model.U.norm() < 1e-10);
}

TEST_CASE("factor fit argument checks") {
  CHECK_THROWS_AS(fit_factor_model(Matrix::Identity(3, 3), 4), InvalidArgument);
  CHECK_THROWS_AS(fit_factor_model(Matrix::Identity(3, 3), 0), InvalidArgument);
  FactorModel bad;
  bad.d = -Vector::Ones(2);
  bad.U = Matrix::Zero(2, 1);
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

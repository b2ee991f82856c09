#include "fastknock/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fastknock {

FactorModel normalize_to_correlation(const FactorModel& model) {
  const Vector sigma = model.diagonal();
  if ((sigma.array() <= 0.0).any()) throw InvalidArgument("cannot normalize a model with a zero variance");
  FactorModel out;
  out.d = model.d.cwiseQuotient(sigma);
  out.U = sigma.cwiseSqrt().cwiseInverse().asDiagonal() * model.U;
  return out;
}

FactorModel random_factor_correlation(Index p, Index k, Rng& rng) {
  if (p < 1 || k < 1 || k > p) throw InvalidArgument("need 1 <= k <= p");
  FactorModel m;
  m.d.resize(p);
  for (Index i = 0; i < p; ++i) m.d(i) = rng.uniform();
  m.U = rng.normal_matrix(p, k) / std::sqrt(static_cast<double>(k));
  return normalize_to_correlation(m);
}

FactorModel benchmark_factor_correlation(Index p, Rng& rng, Index k) {
  if (k <= 0) k = static_cast<Index>(std::ceil(0.05 * static_cast<double>(p)));
  if (p < 1 || k > p) throw InvalidArgument("need 1 <= k <= p");
  FactorModel m;
  m.d = Vector::Constant(p, 1e-3);
  Vector l(k);
  for (Index i = 0; i < k; ++i) l(i) = rng.uniform();
  m.U = rng.normal_matrix(p, k) * l.cwiseSqrt().asDiagonal();
  return normalize_to_correlation(m);
}

Matrix sample_factor_data(const FactorModel& model, Index n, Rng& rng) {
  const Index p = model.dim();
  const Vector sd = model.d.cwiseSqrt();
  Matrix X(p, n);
  for (Index i = 0; i < n; ++i) {
    const Vector g1 = rng.normal_vector(p);
    const Vector g2 = rng.normal_vector(model.rank());
    X.col(i) = sd.cwiseProduct(g1) + model.U * g2;
  }
  return X;
}

SynthDataset synthesize(const SynthConfig& cfg) {
  if (cfg.n < 2) throw InvalidArgument("synth: n must be >= 2");
  if (cfg.sparsity < 0 || cfg.sparsity > cfg.p) {
    throw InvalidArgument("synth: sparsity " + std::to_string(cfg.sparsity) + " exceeds p = " + std::to_string(cfg.p));
  }
  Rng rng(cfg.seed);
  SynthDataset out;
  out.model = random_factor_correlation(cfg.p, cfg.k, rng);

  std::vector<Index> order(static_cast<std::size_t>(cfg.p));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  out.support.assign(order.begin(), order.begin() + cfg.sparsity);
  std::sort(out.support.begin(), out.support.end());

  out.beta = Vector::Zero(cfg.p);
  const double magnitude = cfg.amplitude / std::sqrt(static_cast<double>(cfg.n));
  for (Index j : out.support) out.beta(j) = rng.uniform() < 0.5 ? -magnitude : magnitude;

  out.X = sample_factor_data(out.model, cfg.n, rng);
  out.y = out.X.transpose() * out.beta + cfg.noise * rng.normal_vector(cfg.n);
  return out;
}

}  // namespace fastknock

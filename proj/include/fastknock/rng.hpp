#pragma once

#include <cstdint>
#include <random>

#include "fastknock/linalg.hpp"

namespace fastknock {

/// One splitmix64 step; advances state.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for stream `stream` under `master`; distinct streams are decorrelated.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t master, std::uint64_t stream) : gen_(derive_seed(master, stream)) {}

  double normal() { return normal_(gen_); }
  double uniform() { return uniform_(gen_); }
  Vector normal_vector(Index n);
  Matrix normal_matrix(Index rows, Index cols);
  /// Uniform integer in [0, n).
  Index index(Index n);
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

}  // namespace fastknock

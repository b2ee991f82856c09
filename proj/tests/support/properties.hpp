#pragma once

// Randomized property checks shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <string>
#include <vector>

namespace property {

struct Report {
  std::string name;
  long cases = 0;
  long failures = 0;
  std::string first_failure;

  void fail(const std::string& what);
  bool ok() const { return failures == 0 && cases > 0; }
};

/// Barrier objective at fixed lambda never decreases across a coordinate update
/// (naive and stable solvers).
Report barrier_monotonicity(int instances, std::uint64_t seed);

/// Every coordinate update equals the 1-D barrier maximizer found by golden section.
Report clipping_correctness(int instances, std::uint64_t seed);

/// Full-rank iterates stay strictly inside 2 Sigma - diag(s) > 0 after every sweep.
Report strict_interior(int instances, std::uint64_t seed);

/// Centroid statistic: swapping any subset of features with their knockoffs
/// negates exactly that subset of W, over all subsets for p = 1..max_p.
Report centroid_flip_sign(int max_p, std::uint64_t seed);

/// LCD at a fixed penalty: same antisymmetry within 1e-6 on random subsets.
Report lcd_flip_sign(int instances, std::uint64_t seed);

/// Lowering q never enlarges the selected set.
Report threshold_monotonicity(int instances, std::uint64_t seed);

/// Cholesky update then downdate by the same vector, and QR with +c then -c,
/// restore the original factors.
Report rank_one_inverses(int instances, std::uint64_t seed);

/// The four suites named as the standalone property run.
std::vector<Report> standalone_suites(std::uint64_t seed);

}  // namespace property

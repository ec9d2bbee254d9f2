#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace shrinkfit {

// Cross-fitting fold assignment. Folds are 0-based internally.
struct FoldAssignment {
  std::vector<int> fold_of;  // length n, values in [0, K)
  int K = 0;
  std::uint64_t seed = 0;

  std::vector<std::vector<long>> fold_indices() const;
  std::vector<long> fold_sizes() const;
};

// Balanced fold assignment, deterministic in seed. When strata are given
// the assignment is balanced within every stratum (sizes differ by at
// most one), so each (stratum, fold) cell stays populated. Throws
// fold_stratification_error when any stratum has fewer than K rows.
FoldAssignment make_folds(long n, int K, std::uint64_t seed,
                          const std::vector<int>* strata = nullptr);

}  // namespace shrinkfit

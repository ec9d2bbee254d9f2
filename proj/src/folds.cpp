#include "shrinkfit/folds.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/rng.hpp"

namespace shrinkfit {

std::vector<std::vector<long>> FoldAssignment::fold_indices() const {
  std::vector<std::vector<long>> out(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    out[static_cast<std::size_t>(fold_of[i])].push_back(static_cast<long>(i));
  }
  return out;
}

std::vector<long> FoldAssignment::fold_sizes() const {
  std::vector<long> sizes(static_cast<std::size_t>(K), 0);
  for (int f : fold_of) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

FoldAssignment make_folds(long n, int K, std::uint64_t seed, const std::vector<int>* strata) {
  if (K < 2) throw std::invalid_argument("make_folds: K must be >= 2");
  if (n < K) {
    throw fold_stratification_error("make_folds: n = " + std::to_string(n) +
                                    " is smaller than K = " + std::to_string(K));
  }
  if (strata && static_cast<long>(strata->size()) != n) {
    throw std::invalid_argument("make_folds: strata length must equal n");
  }

  // Rows per stratum, keyed by the stratum label in sorted order so the
  // assignment does not depend on row order beyond the labels themselves.
  std::map<int, std::vector<long>> groups;
  if (strata) {
    for (long i = 0; i < n; ++i) groups[(*strata)[static_cast<std::size_t>(i)]].push_back(i);
  } else {
    auto& all = groups[0];
    all.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) all.push_back(i);
  }

  FoldAssignment fa;
  fa.K = K;
  fa.seed = seed;
  fa.fold_of.assign(static_cast<std::size_t>(n), -1);

  std::uint64_t stream = 0;
  for (auto& [label, rows] : groups) {
    if (static_cast<long>(rows.size()) < K) {
      throw fold_stratification_error("make_folds: stratum " + std::to_string(label) + " has " +
                                      std::to_string(rows.size()) + " rows, fewer than K = " +
                                      std::to_string(K));
    }
    Rng rng = Rng::keyed(seed, 0xf01d5u, stream++);
    rng.shuffle(rows);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      fa.fold_of[static_cast<std::size_t>(rows[r])] = static_cast<int>(r % K);
    }
  }
  return fa;
}

}  // namespace shrinkfit

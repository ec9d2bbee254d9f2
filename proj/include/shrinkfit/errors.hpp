#pragma once

#include <stdexcept>
#include <string>

namespace shrinkfit {

// Estimation targets that are undefined at the given inputs (e.g. an
// all-zero parameter vector where a norm appears in a denominator).
class degenerate_parameter_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Normalizing matrix of the penalized-EIF combinator is not invertible.
class singular_normalizer_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested per-coordinate rescaling by a zero residual variance.
class degenerate_scaling_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An empty (group, treatment) or provider cell breaks an EIF denominator.
class positivity_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A stratum is too small to populate every cross-fitting fold.
class fold_stratification_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class insufficient_data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative fit failed to reach its tolerance within max_iter.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class empty_cell_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; carries a 1-based line number when known.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& what, long line = -1)
      : std::runtime_error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace shrinkfit

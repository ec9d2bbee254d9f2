#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace shrinkfit {

// A closed interval; used for confidence intervals.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }
};

// A vector of asymptotically linear point estimates together with
// per-coordinate estimates of the efficiency bound (the EIF variance)
// and the sample size they were computed from.
//
// The one and only standard-error convention in this project:
//   se[d] = sqrt(eif_var[d] / n).
struct EstimateSet {
  Eigen::VectorXd psi;       // point estimates, length D
  Eigen::VectorXd eif_var;   // EIF variance per coordinate, length D
  long n = 0;                // sample size behind the estimates
  std::vector<std::string> labels;  // optional, empty or length D

  Eigen::Index dim() const { return psi.size(); }
  double se(Eigen::Index d) const;
  Eigen::VectorXd se_vector() const;

  // Throws std::invalid_argument unless D >= 1, n >= 1, eif_var >= 0 and
  // all lengths agree.
  void validate() const;
};

enum class PenaltyMethod { None, L1, L2, EB };

std::string to_string(PenaltyMethod m);
PenaltyMethod penalty_method_from_string(const std::string& name);

// Output of a penalization step: shrunk point estimates plus the two
// confidence-interval families (identical widths centered at psi_tilde;
// the shrunk family scales each width by that coordinate's shrinkage
// factor).
struct PenalizedEstimate {
  Eigen::VectorXd psi_tilde;
  double lambda = 0.0;
  PenaltyMethod method = PenaltyMethod::None;
  Eigen::VectorXd shrink_factor;  // in (0, 1], per coordinate
  std::vector<Interval> ci_basic;
  std::vector<Interval> ci_shrunk;
  double alpha = 0.05;
  bool flat_criterion = false;  // L1 tuning hit its cap on an all-zero input
};

// Controls for the one-dimensional L1 tuning-parameter search.
struct SearchConfig {
  int grid_points = 512;  // log-spaced seeding grid
  // Absolute tolerance on the criterion for the "nearly minimize"
  // contract; <= 0 selects 1e-6 * (criterion at 0 + 1e-12).
  double tol = 0.0;
  // Upper bound on lambda; keeps the search total when every estimate is
  // zero and the criterion has no interior minimizer.
  double cap = std::numeric_limits<double>::infinity();
};

// Callbacks describing a twice-differentiable penalized objective
// U(x, x_tilde): gradient and Hessian in the second argument, and the
// cross derivative of the gradient in the first argument. Evaluated at
// the solution, hess and cross must be invertible.
struct PenaltyObjective {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> hess;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> cross;
};

}  // namespace shrinkfit

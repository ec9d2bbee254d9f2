#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "shrinkfit/dataset.hpp"
#include "shrinkfit/estimates.hpp"
#include "shrinkfit/folds.hpp"
#include "shrinkfit/learners.hpp"

namespace shrinkfit {

// Per-observation, per-coordinate EIF evaluations.
struct EifMatrix {
  Eigen::MatrixXd values;  // n x D
  bool centered = false;

  void center();  // subtract column means and mark centered
};

// Per-column sample variance with denominator n. Requires a centered
// matrix with at least two rows.
Eigen::VectorXd eif_variance(const EifMatrix& eif);

// Per-fold decomposition kept for transparency: the fold estimate equals
// plugin + correction, and the final estimate is the fold-size weighted
// combination of the fold estimates.
struct OneStepDiagnostics {
  Eigen::MatrixXd fold_plugin;      // K x D
  Eigen::MatrixXd fold_correction;  // K x D
  Eigen::MatrixXd fold_estimate;    // K x D
  Eigen::MatrixXd fold_weight;      // K x D, columns sum to 1
};

struct OneStepResult {
  EstimateSet est;
  EifMatrix eif;
  OneStepDiagnostics diag;
  FoldAssignment folds;
};

// Cross-fitted one-step estimator of the expected conditional covariance
// between the outcome and each covariate given the others. With scaled
// set, each coordinate is divided by the plug-in residual second moment
// of that covariate so estimates line up with main-terms regression
// coefficients; a zero residual moment raises degenerate_scaling_error.
OneStepResult onestep_linear_assoc(const Dataset& data, int K, const LearnerConfig& learners,
                                   std::uint64_t seed, bool scaled);

// Cross-fitted one-step estimator of the group-specific average
// treatment effect, estimated separately within each group with folds
// stratified by (group, arm). Propensities are truncated to
// [eps_trunc, 1 - eps_trunc].
OneStepResult onestep_group_ate(const Dataset& data, int K, const LearnerConfig& learners,
                                std::uint64_t seed, double eps_trunc = 0.01);

// Injectable nuisances for onestep_group_ate (used to study robustness
// to misspecified fits). Each factory consumes one (group, fold) cell's
// training data — group is the 1-based level — and returns a predictor
// over single rows.
struct GroupAteNuisances {
  using OutcomeModel = std::function<double(double a, const Eigen::RowVectorXd& x)>;
  using PropensityModel = std::function<double(const Eigen::RowVectorXd& x)>;
  std::function<OutcomeModel(int group, const Eigen::MatrixXd& X, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& y)>
      make_outcome;
  std::function<PropensityModel(int group, const Eigen::MatrixXd& X, const Eigen::VectorXd& a)>
      make_propensity;
};

OneStepResult onestep_group_ate_custom(const Dataset& data, int K, std::uint64_t seed,
                                       const GroupAteNuisances& nuisances,
                                       double eps_trunc = 0.01);

// Cross-fitted one-step estimator of the indirectly standardized outcome
// per provider: the mean outcome had each provider's patients been
// reassigned according to the observed assignment mechanism.
OneStepResult onestep_indirect_std(const Dataset& data, int K, const LearnerConfig& learners,
                                   std::uint64_t seed, double eps_trunc = 0.01);

// Centered standardized ratio: psi[d] / observed_mean[d] - 1, with the
// EIF variance carried through by the delta method treating the observed
// mean as known. Throws std::domain_error on a zero observed mean.
EstimateSet srr(const EstimateSet& est, const Eigen::VectorXd& observed_mean);

}  // namespace shrinkfit

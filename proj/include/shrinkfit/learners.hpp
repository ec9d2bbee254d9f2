#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace shrinkfit {

enum class LearnerKind { ols, ridge, lasso, logistic, logistic_lasso, group_mean };

std::string to_string(LearnerKind k);
LearnerKind learner_kind_from_string(const std::string& name);

struct LearnerConfig {
  LearnerKind kind = LearnerKind::ols;
  int cv_folds = 5;
  // Descending penalty grid; empty selects the data-scaled default of
  // 100 log-spaced points from lambda_max down to 1e-4 * lambda_max.
  std::vector<double> lambda_grid;
  int max_iter = 100000;
  double conv_tol = 1e-7;
  // Append squared covariate columns before fitting (outcome models of
  // the causal estimators use this to pick up curvature).
  bool squared_terms = false;
};

// A fitted nuisance regression: linear predictor plus metadata. For
// group_mean fits the per-group means/frequencies are stored instead of
// coefficients.
struct NuisanceFit {
  LearnerKind kind = LearnerKind::ols;
  Eigen::VectorXd coef;    // original (unstandardized) scale
  double intercept = 0.0;
  double cv_lambda = 0.0;  // CV-chosen regularization; 0 when unpenalized
  int fold_id = -1;
  bool separation_warning = false;

  Eigen::VectorXd group_means;
  Eigen::VectorXd group_freqs;

  bool is_logistic() const {
    return kind == LearnerKind::logistic || kind == LearnerKind::logistic_lasso;
  }
  // Linear predictor; logistic kinds return probabilities clamped to
  // [1e-6, 1 - 1e-6].
  double predict(const Eigen::RowVectorXd& x) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;
  double predict_group(int group) const;  // 1-based level
};

// Least squares via normal equations, falling back to a 1e-10 ridge
// jitter on rank deficiency. Requires strictly more rows than fitted
// parameters; throws insufficient_data_error directing the caller to a
// penalized fit otherwise.
NuisanceFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Ridge regression on internally standardized covariates, penalty chosen
// by cv_folds-fold cross-validated squared error over the grid.
NuisanceFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const LearnerConfig& cfg);

// Lasso by cyclic coordinate descent with warm starts along the grid,
// penalty chosen by cross-validated squared error. Covariates are
// standardized internally and the intercept is unpenalized; reported
// coefficients are on the original scale.
NuisanceFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const LearnerConfig& cfg);

// Logistic regression by IRLS (kind logistic), or L1-penalized logistic
// regression by coordinate descent on the IRLS working response with
// cross-validated log-loss (kind logistic_lasso). Detected separation
// falls back to a ridge-stabilized fit with separation_warning set.
NuisanceFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const LearnerConfig& cfg);

// Per-group sample means and frequencies; groups are 1-based levels.
NuisanceFit fit_group_mean(const std::vector<int>& groups, const Eigen::VectorXd& y);

// Dispatch on cfg.kind (group_mean excluded; it has its own signature).
NuisanceFit fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LearnerConfig& cfg);

// The squared-terms design expansion used by the estimators.
Eigen::MatrixXd with_squared_terms(const Eigen::MatrixXd& X);

// Shared-design lasso machinery. When many lasso subproblems run over
// columns of one design (as the conditional-association estimator does),
// the standardized design and its Gram matrix are built once and every
// path works in covariance form: a coordinate update then costs O(p)
// instead of O(n).
struct GramCache {
  Eigen::MatrixXd Xs;    // standardized columns; constant columns zeroed
  Eigen::VectorXd mean;  // column means
  Eigen::VectorXd sd;    // population sds; 0 marks a constant column
  Eigen::MatrixXd gram;  // Xs' Xs / n, unit diagonal on live columns
  long n = 0;

  static GramCache build(const Eigen::MatrixXd& X);
  // Moment vector Xs' (t - mean(t)) / n for a target t of length n.
  Eigen::VectorXd moments(const Eigen::VectorXd& t) const;
  // Rows standardized with this cache's statistics (for held-out data).
  Eigen::MatrixXd standardize_rows(const Eigen::MatrixXd& X_rows) const;
};

// Warm-started lasso path in covariance form. c is the target moment
// vector and target_var the target's variance; column `skip` (when >= 0)
// is excluded from the model. Sweeps stop on an objective-scaled
// tolerance derived from conv_tol, and the path freezes once the
// explained variance saturates. Returns the standardized solution at
// every grid point (grid descending; frozen entries repeat the last
// computed solution).
std::vector<Eigen::VectorXd> gram_lasso_path(const GramCache& cache, const Eigen::VectorXd& c,
                                             Eigen::Index skip, const std::vector<double>& grid,
                                             int max_iter, double conv_tol, double target_var);

// Tight refinement of one solution at a single penalty, warm-started
// from beta (absolute coordinate tolerance).
void gram_lasso_polish(const GramCache& cache, const Eigen::VectorXd& c, Eigen::Index skip,
                       double lambda, Eigen::VectorXd& beta, int max_iter, double tol);

// The default descending penalty grid used by the lasso fits.
std::vector<double> lasso_default_grid(double lambda_max, int points = 100);

}  // namespace shrinkfit

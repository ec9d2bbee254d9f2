#pragma once

#include <Eigen/Dense>
#include <utility>

#include "shrinkfit/estimates.hpp"

namespace shrinkfit {

// Soft-threshold map: shifts x towards zero by lambda, clipping to zero
// on [-lambda, lambda]. Throws std::invalid_argument for lambda < 0.
double soft_threshold(double x, double lambda);
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double lambda);

// Exact mean and variance of S_lambda(Z) for Z ~ N(mu, var).
// The returned variance is clamped at zero to absorb floating-point
// cancellation near the var -> 0 limit.
std::pair<double, double> st_normal_moments(double mu, double var, double lambda);

// Ratio of the summed EIF variances to the squared norm of the
// estimates; drives the L2 tuning choice. Throws
// degenerate_parameter_error when psi is identically zero.
double gamma(const EstimateSet& est);

// Approximate MSE of the L2-penalized estimator at penalty lambda.
double l2_crit(double lambda, const EstimateSet& est);

// Closed-form minimizer of l2_crit: gamma(est) / n. Returns 0 when all
// EIF variances are zero.
double l2_lambda_star(const EstimateSet& est);

// Scale every estimate by 1/(1+lambda) and attach both CI families.
PenalizedEstimate l2_shrink(const EstimateSet& est, double lambda, double alpha = 0.05);

// Approximate MSE of the soft-thresholded estimator at penalty lambda,
// summing per-coordinate squared bias plus variance of the
// soft-thresholded normal approximation.
double l1_crit(double lambda, const EstimateSet& est);

// Numerical minimizer of l1_crit over [0, lambda_max] with
// lambda_max = max|psi| + 6 max se, capped by search.cap. When every
// psi[d] is zero the criterion decreases towards the boundary: with a
// finite cap the bound itself is returned and *flat_criterion set,
// otherwise degenerate_parameter_error is thrown.
double l1_lambda_star(const EstimateSet& est, const SearchConfig& search = {},
                      bool* flat_criterion = nullptr);

// Soft-threshold every estimate at lambda. Only the basic CI family is
// defined for L1; ci_shrunk mirrors it.
PenalizedEstimate l1_shrink(const EstimateSet& est, double lambda, double alpha = 0.05);

// Precision-adaptive shrinkage: coordinate d is scaled by
// m / (m + eif_var[d]/n) with m = ||psi||^2 / (D - 1). Requires D >= 2.
PenalizedEstimate eb_shrink(const EstimateSet& est, double alpha = 0.05);

// Dispatch over the supported methods, tuning lambda data-adaptively
// where the method calls for it.
PenalizedEstimate penalize(const EstimateSet& est, PenaltyMethod method, double alpha = 0.05,
                           const SearchConfig& l1_search = {});

// Per-observation EIF of a generic smooth penalized parameter:
//   M^{-1} [ cross(psi, psi_tilde) * eif_psi_row + grad(psi, psi_tilde) ]
// with M = -hess(psi, psi_tilde). eif_psi is n x D, one observation per
// row. Throws singular_normalizer_error when M is not invertible.
Eigen::MatrixXd general_penalized_eif(const Eigen::MatrixXd& eif_psi, const Eigen::VectorXd& psi,
                                      const Eigen::VectorXd& psi_tilde,
                                      const PenaltyObjective& obj);

// Per-observation EIF of gamma. When eif_sigma2 has zero rows the
// plug-in surrogate eif_psi^2 - eif_var is used for the EIF of each
// coordinate's variance bound (the surrogate ignores nuisance terms; it
// feeds diagnostics only, never point estimates).
Eigen::VectorXd gamma_eif(const Eigen::MatrixXd& eif_psi, const Eigen::MatrixXd& eif_sigma2,
                          const EstimateSet& est);

// Per-observation EIF of the L2-penalized parameter at the data-adaptive
// lambda_star, including the 1/n term carrying the uncertainty of the
// tuning estimate.
Eigen::MatrixXd lambda_star_eif(const Eigen::MatrixXd& eif_psi, const Eigen::VectorXd& eif_gamma,
                                const EstimateSet& est, double lambda_star);

}  // namespace shrinkfit

#include "shrinkfit/penalty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/normal.hpp"

namespace shrinkfit {

double soft_threshold(double x, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("soft_threshold: lambda must be >= 0");
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double lambda) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = soft_threshold(x[i], lambda);
  return out;
}

std::pair<double, double> st_normal_moments(double mu, double var, double lambda) {
  if (!(var >= 0.0)) throw std::invalid_argument("st_normal_moments: variance must be >= 0");
  if (!(lambda >= 0.0)) throw std::invalid_argument("st_normal_moments: lambda must be >= 0");
  if (var == 0.0) return {soft_threshold(mu, lambda), 0.0};

  const double cdf_hi = normal_cdf(lambda, mu, var);
  const double cdf_lo = normal_cdf(-lambda, mu, var);
  const double pdf_hi = normal_pdf(lambda, mu, var);
  const double pdf_lo = normal_pdf(-lambda, mu, var);

  const double mean = mu - mu * (cdf_hi - cdf_lo) + lambda * (cdf_hi + cdf_lo - 1.0) +
                      var * (pdf_hi - pdf_lo);

  const double second_moment = ((mu + lambda) * (mu + lambda) + var) * cdf_lo +
                               ((mu - lambda) * (mu - lambda) + var) * (1.0 - cdf_hi) -
                               (mu + lambda) * var * pdf_lo + (mu - lambda) * var * pdf_hi;

  const double variance = std::max(0.0, second_moment - mean * mean);
  return {mean, variance};
}

double gamma(const EstimateSet& est) {
  est.validate();
  const double norm_sq = est.psi.squaredNorm();
  if (norm_sq == 0.0) {
    throw degenerate_parameter_error("gamma: all estimates are zero, ratio undefined");
  }
  return est.eif_var.sum() / norm_sq;
}

double l2_crit(double lambda, const EstimateSet& est) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("l2_crit: lambda must be >= 0");
  const double one_plus = 1.0 + lambda;
  const double bias_term = lambda * lambda / (one_plus * one_plus) * est.psi.squaredNorm();
  const double var_term = est.eif_var.sum() / (static_cast<double>(est.n) * one_plus * one_plus);
  return bias_term + var_term;
}

double l2_lambda_star(const EstimateSet& est) {
  est.validate();
  if (est.eif_var.sum() == 0.0) return 0.0;
  return gamma(est) / static_cast<double>(est.n);
}

namespace {

std::vector<Interval> intervals_at(const Eigen::VectorXd& center, const Eigen::VectorXd& halfwidth) {
  std::vector<Interval> out(static_cast<std::size_t>(center.size()));
  for (Eigen::Index d = 0; d < center.size(); ++d) {
    out[static_cast<std::size_t>(d)] = {center[d] - halfwidth[d], center[d] + halfwidth[d]};
  }
  return out;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must be in (0,1)");
}

}  // namespace

PenalizedEstimate l2_shrink(const EstimateSet& est, double lambda, double alpha) {
  est.validate();
  check_alpha(alpha);
  if (!(lambda >= 0.0)) throw std::invalid_argument("l2_shrink: lambda must be >= 0");

  const double factor = 1.0 / (1.0 + lambda);
  PenalizedEstimate out;
  out.method = PenaltyMethod::L2;
  out.lambda = lambda;
  out.alpha = alpha;
  out.psi_tilde = est.psi * factor;
  out.shrink_factor = Eigen::VectorXd::Constant(est.dim(), factor);

  const double q = two_sided_critical_value(alpha);
  const Eigen::VectorXd basic_hw = q * est.se_vector();
  out.ci_basic = intervals_at(out.psi_tilde, basic_hw);
  out.ci_shrunk = intervals_at(out.psi_tilde, factor * basic_hw);
  return out;
}

double l1_crit(double lambda, const EstimateSet& est) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("l1_crit: lambda must be >= 0");
  const double n = static_cast<double>(est.n);
  double total = 0.0;
  for (Eigen::Index d = 0; d < est.dim(); ++d) {
    auto [mean, variance] = st_normal_moments(est.psi[d], est.eif_var[d] / n, lambda);
    const double bias = mean - est.psi[d];
    total += bias * bias + variance;
  }
  return total;
}

namespace {

// Golden-section minimization of f on [a, b]; the interval is assumed to
// bracket a local minimizer. Stops once the criterion varies by less
// than value_tol over the bracket (or the bracket itself collapses) and
// returns the midpoint.
template <typename F>
double golden_section(F&& f, double a, double b, double value_tol) {
  constexpr double invphi = 0.6180339887498949;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < 200; ++it) {
    if (std::abs(f1 - f2) < value_tol && (b - a) < 1e-3 * (1.0 + b)) break;
    if ((b - a) < 1e-12 * (1.0 + b)) break;
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

double l1_lambda_star(const EstimateSet& est, const SearchConfig& search, bool* flat_criterion) {
  est.validate();
  if (flat_criterion) *flat_criterion = false;

  const double max_abs_psi = est.psi.cwiseAbs().maxCoeff();
  const double max_se = est.se_vector().maxCoeff();
  const double lambda_max = std::min(max_abs_psi + 6.0 * max_se, search.cap);

  if (max_abs_psi == 0.0) {
    // Criterion decreases towards the boundary; only a cap makes the
    // search well-posed.
    if (!std::isfinite(search.cap)) {
      throw degenerate_parameter_error(
          "l1_lambda_star: all estimates are zero and no cap is configured");
    }
    if (flat_criterion) *flat_criterion = true;
    return lambda_max;
  }
  if (lambda_max == 0.0) return 0.0;

  const auto crit = [&est](double lam) { return l1_crit(lam, est); };
  const double crit_at_zero = crit(0.0);
  const double tol = search.tol > 0.0 ? search.tol : 1e-6 * (crit_at_zero + 1e-12);

  // Log-spaced seeding grid over (0, lambda_max], plus zero itself.
  const int g = std::max(search.grid_points, 8);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(g) + 1);
  grid.push_back(0.0);
  const double log_lo = std::log(lambda_max) - 6.0 * std::log(10.0);
  const double log_hi = std::log(lambda_max);
  for (int i = 0; i < g; ++i) {
    grid.push_back(std::exp(log_lo + (log_hi - log_lo) * i / static_cast<double>(g - 1)));
  }

  std::size_t best = 0;
  double best_val = crit_at_zero;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = crit(grid[i]);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }

  const double lo = best > 0 ? grid[best - 1] : 0.0;
  const double hi = best + 1 < grid.size() ? grid[best + 1] : lambda_max;
  const double refined = golden_section(crit, lo, hi, 0.01 * tol);
  const double refined_val = crit(refined);

  double arg = grid[best];
  double val = best_val;
  if (refined_val < val) {
    arg = refined;
    val = refined_val;
  }
  // Prefer no shrinkage on exact ties so zero-noise inputs pass through.
  if (crit_at_zero <= val) arg = 0.0;
  return arg;
}

PenalizedEstimate l1_shrink(const EstimateSet& est, double lambda, double alpha) {
  est.validate();
  check_alpha(alpha);
  if (!(lambda >= 0.0)) throw std::invalid_argument("l1_shrink: lambda must be >= 0");

  PenalizedEstimate out;
  out.method = PenaltyMethod::L1;
  out.lambda = lambda;
  out.alpha = alpha;
  out.psi_tilde = soft_threshold(est.psi, lambda);
  out.shrink_factor = Eigen::VectorXd::Ones(est.dim());

  const double q = two_sided_critical_value(alpha);
  const Eigen::VectorXd basic_hw = q * est.se_vector();
  out.ci_basic = intervals_at(out.psi_tilde, basic_hw);
  out.ci_shrunk = out.ci_basic;
  return out;
}

PenalizedEstimate eb_shrink(const EstimateSet& est, double alpha) {
  est.validate();
  check_alpha(alpha);
  const Eigen::Index d_count = est.dim();
  if (d_count < 2) throw std::invalid_argument("eb_shrink: requires at least two coordinates");

  const double n = static_cast<double>(est.n);
  const double m = est.psi.squaredNorm() / static_cast<double>(d_count - 1);

  PenalizedEstimate out;
  out.method = PenaltyMethod::EB;
  out.lambda = 0.0;
  out.alpha = alpha;
  out.shrink_factor.resize(d_count);
  for (Eigen::Index d = 0; d < d_count; ++d) {
    out.shrink_factor[d] = m == 0.0 ? 0.0 : m / (m + est.eif_var[d] / n);
  }
  out.psi_tilde = out.shrink_factor.cwiseProduct(est.psi);

  const double q = two_sided_critical_value(alpha);
  const Eigen::VectorXd basic_hw = q * est.se_vector();
  out.ci_basic = intervals_at(out.psi_tilde, basic_hw);
  out.ci_shrunk = intervals_at(out.psi_tilde, out.shrink_factor.cwiseProduct(basic_hw));
  return out;
}

PenalizedEstimate penalize(const EstimateSet& est, PenaltyMethod method, double alpha,
                           const SearchConfig& l1_search) {
  est.validate();
  check_alpha(alpha);
  switch (method) {
    case PenaltyMethod::None: {
      PenalizedEstimate out = l1_shrink(est, 0.0, alpha);  // identity at lambda = 0
      out.method = PenaltyMethod::None;
      return out;
    }
    case PenaltyMethod::L2:
      return l2_shrink(est, l2_lambda_star(est), alpha);
    case PenaltyMethod::L1: {
      bool flat = false;
      const double lambda = l1_lambda_star(est, l1_search, &flat);
      PenalizedEstimate out = l1_shrink(est, lambda, alpha);
      out.flat_criterion = flat;
      return out;
    }
    case PenaltyMethod::EB:
      return eb_shrink(est, alpha);
  }
  throw std::invalid_argument("penalize: unknown method");
}

Eigen::MatrixXd general_penalized_eif(const Eigen::MatrixXd& eif_psi, const Eigen::VectorXd& psi,
                                      const Eigen::VectorXd& psi_tilde,
                                      const PenaltyObjective& obj) {
  const Eigen::Index d_count = psi.size();
  if (psi_tilde.size() != d_count || eif_psi.cols() != d_count) {
    throw std::invalid_argument("general_penalized_eif: dimension mismatch");
  }
  if (!obj.grad || !obj.hess || !obj.cross) {
    throw std::invalid_argument("general_penalized_eif: objective callbacks must be set");
  }

  const Eigen::VectorXd grad = obj.grad(psi, psi_tilde);
  const Eigen::MatrixXd normalizer = -obj.hess(psi, psi_tilde);
  const Eigen::MatrixXd cross = obj.cross(psi, psi_tilde);
  if (grad.size() != d_count || normalizer.rows() != d_count || normalizer.cols() != d_count ||
      cross.rows() != d_count || cross.cols() != d_count) {
    throw std::invalid_argument("general_penalized_eif: callback output dimension mismatch");
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(normalizer);
  if (!lu.isInvertible()) {
    throw singular_normalizer_error("general_penalized_eif: normalizing matrix is singular");
  }

  // Row o of the result is M^{-1} (cross * eif_row + grad).
  Eigen::MatrixXd transformed = eif_psi * cross.transpose();
  const Eigen::VectorXd offset = lu.solve(grad);
  Eigen::MatrixXd out = lu.solve(transformed.transpose()).transpose();
  out.rowwise() += offset.transpose();
  return out;
}

Eigen::VectorXd gamma_eif(const Eigen::MatrixXd& eif_psi, const Eigen::MatrixXd& eif_sigma2,
                          const EstimateSet& est) {
  est.validate();
  if (eif_psi.cols() != est.dim()) {
    throw std::invalid_argument("gamma_eif: eif_psi has wrong number of columns");
  }
  const double norm = est.psi.norm();
  if (norm == 0.0) {
    throw degenerate_parameter_error("gamma_eif: all estimates are zero");
  }

  Eigen::MatrixXd sigma2 = eif_sigma2;
  if (sigma2.rows() == 0) {
    // Plug-in surrogate for the EIF of each variance bound.
    sigma2 = eif_psi.array().square().matrix();
    sigma2.rowwise() -= est.eif_var.transpose();
  }
  if (sigma2.rows() != eif_psi.rows() || sigma2.cols() != eif_psi.cols()) {
    throw std::invalid_argument("gamma_eif: eif_sigma2 dimension mismatch");
  }

  const double trace = est.eif_var.sum();
  const double norm3 = norm * norm * norm;
  return (-2.0 * trace / norm3) * eif_psi.rowwise().sum() +
         sigma2.rowwise().sum() / (norm * norm);
}

Eigen::MatrixXd lambda_star_eif(const Eigen::MatrixXd& eif_psi, const Eigen::VectorXd& eif_gamma,
                                const EstimateSet& est, double lambda_star) {
  est.validate();
  if (!(lambda_star >= 0.0)) throw std::invalid_argument("lambda_star_eif: lambda_star must be >= 0");
  if (eif_psi.cols() != est.dim() || eif_gamma.size() != eif_psi.rows()) {
    throw std::invalid_argument("lambda_star_eif: dimension mismatch");
  }
  const double one_plus = 1.0 + lambda_star;
  const double scale = 1.0 / (static_cast<double>(est.n) * one_plus * one_plus);
  return eif_psi / one_plus - scale * (eif_gamma * est.psi.transpose());
}

}  // namespace shrinkfit

#include "shrinkfit/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "shrinkfit/errors.hpp"

namespace shrinkfit {

void EifMatrix::center() {
  if (values.rows() == 0) return;
  values.rowwise() -= values.colwise().mean().eval();
  centered = true;
}

Eigen::VectorXd eif_variance(const EifMatrix& eif) {
  if (!eif.centered) throw std::invalid_argument("eif_variance: matrix must be centered");
  if (eif.values.rows() < 2) {
    throw insufficient_data_error("eif_variance: need at least two observations");
  }
  const double n = static_cast<double>(eif.values.rows());
  return eif.values.colwise().squaredNorm() / n;
}

namespace {

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& X, const std::vector<long>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
  }
  return out;
}

Eigen::VectorXd elems_of(const Eigen::VectorXd& v, const std::vector<long>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[rows[i]];
  return out;
}

// Per-coordinate CV'd lasso solutions for the leave-one-covariate-out
// subproblems over a shared training design: one Gram per CV split
// serves every coordinate and both targets.
struct SubproblemFit {
  Eigen::VectorXd beta_x;  // standardized coefficients, entry d forced 0
  Eigen::VectorXd beta_y;
  double mean_x = 0.0;  // training mean of the covariate target
  double mean_y = 0.0;  // training mean of the outcome target
};

struct SharedLassoFits {
  GramCache cache;  // built on the full training design
  std::vector<SubproblemFit> fits;
};

SharedLassoFits shared_lasso_fits(const Eigen::MatrixXd& X_train, const Eigen::VectorXd& y_train,
                                  const LearnerConfig& cfg) {
  const Eigen::Index p = X_train.cols();
  const long n = X_train.rows();
  const int folds = cfg.cv_folds;
  if (folds < 2) throw std::invalid_argument("shared_lasso_fits: cv_folds must be >= 2");

  SharedLassoFits out;
  out.cache = GramCache::build(X_train);
  const Eigen::VectorXd c_y = out.cache.moments(y_train);

  // Penalty grids per (coordinate, target), anchored at that
  // subproblem's lambda_max on the full training design.
  std::vector<std::vector<double>> grid_x(static_cast<std::size_t>(p)),
      grid_y(static_cast<std::size_t>(p));
  for (Eigen::Index d = 0; d < p; ++d) {
    const Eigen::VectorXd c_xd = out.cache.gram.col(d) * out.cache.sd[d];
    double lmax_x = 0.0, lmax_y = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (j == d || out.cache.sd[j] <= 0.0) continue;
      lmax_x = std::max(lmax_x, std::abs(c_xd[j]));
      lmax_y = std::max(lmax_y, std::abs(c_y[j]));
    }
    grid_x[static_cast<std::size_t>(d)] =
        cfg.lambda_grid.empty() ? lasso_default_grid(lmax_x) : cfg.lambda_grid;
    grid_y[static_cast<std::size_t>(d)] =
        cfg.lambda_grid.empty() ? lasso_default_grid(lmax_y) : cfg.lambda_grid;
  }

  std::vector<std::vector<double>> err_x(static_cast<std::size_t>(p)),
      err_y(static_cast<std::size_t>(p));
  for (Eigen::Index d = 0; d < p; ++d) {
    err_x[static_cast<std::size_t>(d)].assign(grid_x[static_cast<std::size_t>(d)].size(), 0.0);
    err_y[static_cast<std::size_t>(d)].assign(grid_y[static_cast<std::size_t>(d)].size(), 0.0);
  }

  for (int f = 0; f < folds; ++f) {
    std::vector<long> sub, held;
    for (long i = 0; i < n; ++i) (i % folds == f ? held : sub).push_back(i);
    const Eigen::MatrixXd X_sub = rows_of(X_train, sub);
    const Eigen::VectorXd y_sub = elems_of(y_train, sub);
    const GramCache cache = GramCache::build(X_sub);
    const Eigen::VectorXd c_y_sub = cache.moments(y_sub);
    const Eigen::MatrixXd Xs_held = cache.standardize_rows(rows_of(X_train, held));
    const Eigen::VectorXd y_held = elems_of(y_train, held);
    const double y_sub_mean = y_sub.mean();

    const auto accumulate = [&](const std::vector<Eigen::VectorXd>& path,
                                const Eigen::VectorXd& target_held, double target_mean,
                                std::vector<double>& err) {
      Eigen::VectorXd pred(Xs_held.rows());
      for (std::size_t l = 0; l < path.size(); ++l) {
        pred.setConstant(target_mean);
        const Eigen::VectorXd& beta = path[l];
        for (Eigen::Index j = 0; j < beta.size(); ++j) {
          if (beta[j] != 0.0) pred.noalias() += Xs_held.col(j) * beta[j];
        }
        err[l] += (target_held - pred).squaredNorm();
      }
    };

    const double var_y_sub = (y_sub.array() - y_sub_mean).square().mean();
    for (Eigen::Index d = 0; d < p; ++d) {
      const Eigen::VectorXd c_xd = cache.gram.col(d) * cache.sd[d];
      const auto path_x =
          gram_lasso_path(cache, c_xd, d, grid_x[static_cast<std::size_t>(d)], cfg.max_iter,
                          cfg.conv_tol, cache.sd[d] * cache.sd[d]);
      Eigen::VectorXd xd_held(held.size());
      for (std::size_t i = 0; i < held.size(); ++i) {
        xd_held[static_cast<Eigen::Index>(i)] = X_train(held[i], d);
      }
      accumulate(path_x, xd_held, cache.mean[d], err_x[static_cast<std::size_t>(d)]);

      const auto path_y = gram_lasso_path(cache, c_y_sub, d, grid_y[static_cast<std::size_t>(d)],
                                          cfg.max_iter, cfg.conv_tol, var_y_sub);
      accumulate(path_y, y_held, y_sub_mean, err_y[static_cast<std::size_t>(d)]);
    }
  }

  const auto argmin = [](const std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i] < v[best]) best = i;
    }
    return best;
  };

  out.fits.resize(static_cast<std::size_t>(p));
  const double y_mean = y_train.mean();
  const double var_y = (y_train.array() - y_mean).square().mean();
  for (Eigen::Index d = 0; d < p; ++d) {
    const Eigen::VectorXd c_xd = out.cache.gram.col(d) * out.cache.sd[d];
    const auto path_x = gram_lasso_path(out.cache, c_xd, d, grid_x[static_cast<std::size_t>(d)],
                                        cfg.max_iter, cfg.conv_tol,
                                        out.cache.sd[d] * out.cache.sd[d]);
    const auto path_y = gram_lasso_path(out.cache, c_y, d, grid_y[static_cast<std::size_t>(d)],
                                        cfg.max_iter, cfg.conv_tol, var_y);
    auto& fit = out.fits[static_cast<std::size_t>(d)];
    fit.beta_x = path_x[argmin(err_x[static_cast<std::size_t>(d)])];
    fit.beta_y = path_y[argmin(err_y[static_cast<std::size_t>(d)])];
    fit.mean_x = out.cache.mean[d];
    fit.mean_y = y_mean;
  }
  return out;
}

}  // namespace

OneStepResult onestep_linear_assoc(const Dataset& data, int K, const LearnerConfig& learners,
                                   std::uint64_t seed, bool scaled) {
  if (K < 2) throw std::invalid_argument("onestep_linear_assoc: K must be >= 2");
  const long n = data.n_rows();
  if (n < 5L * K) {
    throw insufficient_data_error("onestep_linear_assoc: need at least 5K rows");
  }
  const auto& covs = data.roles().covariates;
  const Eigen::Index d_count = static_cast<Eigen::Index>(covs.size());
  if (d_count < 1) throw std::invalid_argument("onestep_linear_assoc: no covariates assigned");

  const Eigen::VectorXd y = data.outcome();
  const Eigen::MatrixXd X = data.covariate_matrix();

  OneStepResult res;
  res.folds = make_folds(n, K, seed);
  const auto fold_rows = res.folds.fold_indices();

  res.eif.values.resize(n, d_count);
  res.diag.fold_plugin.resize(K, d_count);
  res.diag.fold_correction.resize(K, d_count);
  res.diag.fold_estimate.resize(K, d_count);
  res.diag.fold_weight.resize(K, d_count);

  Eigen::VectorXd psi(d_count), scale(d_count);
  Eigen::MatrixXd products(n, d_count);
  Eigen::MatrixXd covariate_resid(n, d_count);

  const auto sparse_predict = [](const Eigen::MatrixXd& Xs, const Eigen::VectorXd& beta,
                                 double mean) {
    Eigen::VectorXd pred = Eigen::VectorXd::Constant(Xs.rows(), mean);
    for (Eigen::Index j = 0; j < beta.size(); ++j) {
      if (beta[j] != 0.0) pred.noalias() += Xs.col(j) * beta[j];
    }
    return pred;
  };

  for (int k = 0; k < K; ++k) {
    std::vector<long> train;
    train.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      if (res.folds.fold_of[static_cast<std::size_t>(i)] != k) train.push_back(i);
    }
    const auto& eval = fold_rows[static_cast<std::size_t>(k)];
    const double weight = static_cast<double>(eval.size()) / static_cast<double>(n);

    const auto record = [&](Eigen::Index d, const Eigen::VectorXd& pi_tr,
                            const Eigen::VectorXd& mu_tr, const Eigen::VectorXd& pi_ev,
                            const Eigen::VectorXd& mu_ev) {
      double plugin = 0.0;
      for (std::size_t i = 0; i < train.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        plugin += (X(train[i], d) - pi_tr[ii]) * (y[train[i]] - mu_tr[ii]);
      }
      plugin /= static_cast<double>(train.size());

      double in_fold_mean = 0.0;
      for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double resid_x = X(eval[i], d) - pi_ev[ii];
        const double prod = resid_x * (y[eval[i]] - mu_ev[ii]);
        products(eval[i], d) = prod;
        covariate_resid(eval[i], d) = resid_x;
        in_fold_mean += prod;
      }
      in_fold_mean /= static_cast<double>(eval.size());

      res.diag.fold_plugin(k, d) = plugin;
      res.diag.fold_correction(k, d) = in_fold_mean - plugin;
      res.diag.fold_estimate(k, d) = in_fold_mean;
      res.diag.fold_weight(k, d) = weight;
    };

    if (learners.kind == LearnerKind::lasso) {
      // Shared-design route: one Gram per CV split serves every
      // coordinate's pair of subproblems.
      const Eigen::MatrixXd X_train = rows_of(X, train);
      const SharedLassoFits shared = shared_lasso_fits(X_train, elems_of(y, train), learners);
      const Eigen::MatrixXd Xs_eval = shared.cache.standardize_rows(rows_of(X, eval));
      for (Eigen::Index d = 0; d < d_count; ++d) {
        const auto& f = shared.fits[static_cast<std::size_t>(d)];
        record(d, sparse_predict(shared.cache.Xs, f.beta_x, f.mean_x),
               sparse_predict(shared.cache.Xs, f.beta_y, f.mean_y),
               sparse_predict(Xs_eval, f.beta_x, f.mean_x),
               sparse_predict(Xs_eval, f.beta_y, f.mean_y));
      }
    } else {
      for (Eigen::Index d = 0; d < d_count; ++d) {
        Eigen::MatrixXd rest(n, d_count - 1);
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < d_count; ++j) {
          if (j != d) rest.col(c++) = X.col(j);
        }
        const Eigen::MatrixXd rest_train = rows_of(rest, train);
        const NuisanceFit pi_hat = fit(rest_train, elems_of(X.col(d), train), learners);
        const NuisanceFit mu_hat = fit(rest_train, elems_of(y, train), learners);
        const Eigen::MatrixXd rest_eval = rows_of(rest, eval);
        record(d, pi_hat.predict(rest_train), mu_hat.predict(rest_train),
               pi_hat.predict(rest_eval), mu_hat.predict(rest_eval));
      }
    }
  }

  for (Eigen::Index d = 0; d < d_count; ++d) {
    psi[d] = res.diag.fold_weight.col(d).dot(res.diag.fold_estimate.col(d));
    scale[d] = covariate_resid.col(d).squaredNorm() / static_cast<double>(n);
  }

  if (scaled) {
    for (Eigen::Index d = 0; d < d_count; ++d) {
      if (scale[d] < 1e-12) {
        throw degenerate_scaling_error("onestep_linear_assoc: covariate '" + covs[static_cast<std::size_t>(d)] +
                                       "' has zero residual variance, scaled estimate undefined");
      }
      psi[d] /= scale[d];
      products.col(d) /= scale[d];
      res.diag.fold_plugin.col(d) /= scale[d];
      res.diag.fold_correction.col(d) /= scale[d];
      res.diag.fold_estimate.col(d) /= scale[d];
    }
  }

  res.eif.values = products.rowwise() - psi.transpose();
  res.eif.center();

  res.est.psi = psi;
  res.est.eif_var = eif_variance(res.eif);
  res.est.n = n;
  res.est.labels = covs;
  return res;
}

namespace {

OneStepResult group_ate_impl(const Dataset& data, int K, std::uint64_t seed,
                             const GroupAteNuisances& nuisances, double eps_trunc) {
  if (K < 2) throw std::invalid_argument("onestep_group_ate: K must be >= 2");
  if (!(eps_trunc > 0.0 && eps_trunc < 0.5)) {
    throw std::invalid_argument("onestep_group_ate: eps_trunc must be in (0, 0.5)");
  }
  const long n = data.n_rows();
  const Eigen::VectorXd y = data.outcome();
  const Eigen::VectorXd a = data.treatment();
  const Eigen::VectorXd g = data.group();
  require_binary(a, data.roles().treatment);
  const int d_count = require_categorical(g, data.roles().group);
  const Eigen::MatrixXd X = data.covariate_matrix();

  // Positivity and fold-stratification checks per (group, arm) cell.
  Eigen::MatrixXd cell_counts = Eigen::MatrixXd::Zero(d_count, 2);
  for (long i = 0; i < n; ++i) {
    cell_counts(static_cast<int>(g[i]) - 1, static_cast<int>(a[i])) += 1.0;
  }
  for (int d = 0; d < d_count; ++d) {
    for (int arm = 0; arm < 2; ++arm) {
      if (cell_counts(d, arm) == 0.0) {
        throw positivity_error("onestep_group_ate: group " + std::to_string(d + 1) + " has no " +
                               (arm == 1 ? "treated" : "control") + " observations");
      }
      if (cell_counts(d, arm) < K) {
        throw fold_stratification_error(
            "onestep_group_ate: group " + std::to_string(d + 1) + " arm " + std::to_string(arm) +
            " has " + std::to_string(static_cast<long>(cell_counts(d, arm))) +
            " rows, fewer than K = " + std::to_string(K));
      }
    }
  }

  std::vector<int> strata(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    strata[static_cast<std::size_t>(i)] =
        (static_cast<int>(g[i]) - 1) * 2 + static_cast<int>(a[i]);
  }

  OneStepResult res;
  res.folds = make_folds(n, K, seed, &strata);

  res.eif.values = Eigen::MatrixXd::Zero(n, d_count);
  res.diag.fold_plugin.resize(K, d_count);
  res.diag.fold_correction.resize(K, d_count);
  res.diag.fold_estimate.resize(K, d_count);
  res.diag.fold_weight.resize(K, d_count);

  Eigen::VectorXd psi(d_count);
  Eigen::VectorXd phi(n);  // uncentered pseudo-outcomes, group-wise

  for (int d = 0; d < d_count; ++d) {
    std::vector<long> group_rows;
    for (long i = 0; i < n; ++i) {
      if (static_cast<int>(g[i]) == d + 1) group_rows.push_back(i);
    }
    const double n_d = static_cast<double>(group_rows.size());

    for (int k = 0; k < K; ++k) {
      std::vector<long> train, eval;
      for (long i : group_rows) {
        (res.folds.fold_of[static_cast<std::size_t>(i)] == k ? eval : train).push_back(i);
      }
      const Eigen::MatrixXd X_tr = rows_of(X, train);
      const auto outcome_model =
          nuisances.make_outcome(d + 1, X_tr, elems_of(a, train), elems_of(y, train));
      const auto propensity_model = nuisances.make_propensity(d + 1, X_tr, elems_of(a, train));

      double plugin = 0.0, correction = 0.0;
      for (long i : eval) {
        const Eigen::RowVectorXd x = X.row(i);
        const double mu1 = outcome_model(1.0, x);
        const double mu0 = outcome_model(0.0, x);
        const double pi1 =
            std::min(1.0 - eps_trunc, std::max(eps_trunc, propensity_model(x)));
        const double pi_obs = a[i] == 1.0 ? pi1 : 1.0 - pi1;
        const double mu_obs = a[i] == 1.0 ? mu1 : mu0;
        const double resid_term = (2.0 * a[i] - 1.0) * (y[i] - mu_obs) / pi_obs;
        phi[i] = resid_term + mu1 - mu0;
        plugin += mu1 - mu0;
        correction += resid_term;
      }
      plugin /= static_cast<double>(eval.size());
      correction /= static_cast<double>(eval.size());
      res.diag.fold_plugin(k, d) = plugin;
      res.diag.fold_correction(k, d) = correction;
      res.diag.fold_estimate(k, d) = plugin + correction;
      res.diag.fold_weight(k, d) = static_cast<double>(eval.size()) / n_d;
    }

    psi[d] = res.diag.fold_weight.col(d).dot(res.diag.fold_estimate.col(d));

    const double p_d = n_d / static_cast<double>(n);
    for (long i : group_rows) {
      res.eif.values(i, d) = (phi[i] - psi[d]) / p_d;
    }
  }

  res.eif.center();
  res.est.psi = psi;
  res.est.eif_var = eif_variance(res.eif);
  res.est.n = n;
  return res;
}

}  // namespace

OneStepResult onestep_group_ate_custom(const Dataset& data, int K, std::uint64_t seed,
                                       const GroupAteNuisances& nuisances, double eps_trunc) {
  if (!nuisances.make_outcome || !nuisances.make_propensity) {
    throw std::invalid_argument("onestep_group_ate_custom: both nuisance factories required");
  }
  return group_ate_impl(data, K, seed, nuisances, eps_trunc);
}

OneStepResult onestep_group_ate(const Dataset& data, int K, const LearnerConfig& learners,
                                std::uint64_t seed, double eps_trunc) {
  GroupAteNuisances nuisances;
  nuisances.make_outcome = [&learners](int, const Eigen::MatrixXd& X, const Eigen::VectorXd& a,
                                       const Eigen::VectorXd& y) {
    const Eigen::MatrixXd Xq = learners.squared_terms ? with_squared_terms(X) : X;
    Eigen::MatrixXd design(Xq.rows(), Xq.cols() + 1);
    design.col(0) = a;
    design.rightCols(Xq.cols()) = Xq;
    LearnerConfig outcome_cfg = learners;
    outcome_cfg.squared_terms = false;
    const NuisanceFit fitted = fit(design, y, outcome_cfg);
    const bool squared = learners.squared_terms;
    return GroupAteNuisances::OutcomeModel(
        [fitted, squared](double arm, const Eigen::RowVectorXd& x) {
          Eigen::RowVectorXd row(1 + (squared ? 2 * x.size() : x.size()));
          row[0] = arm;
          row.segment(1, x.size()) = x;
          if (squared) row.tail(x.size()) = x.array().square();
          return fitted.predict(row);
        });
  };
  nuisances.make_propensity = [&learners](int, const Eigen::MatrixXd& X, const Eigen::VectorXd& a) {
    LearnerConfig prop_cfg = learners;
    prop_cfg.kind = LearnerKind::logistic;
    prop_cfg.squared_terms = false;
    const NuisanceFit fitted = fit_logistic(X, a, prop_cfg);
    return GroupAteNuisances::PropensityModel(
        [fitted](const Eigen::RowVectorXd& x) { return fitted.predict(x); });
  };
  return group_ate_impl(data, K, seed, nuisances, eps_trunc);
}

OneStepResult onestep_indirect_std(const Dataset& data, int K, const LearnerConfig& learners,
                                   std::uint64_t seed, double eps_trunc) {
  if (K < 2) throw std::invalid_argument("onestep_indirect_std: K must be >= 2");
  if (!(eps_trunc > 0.0 && eps_trunc < 0.5)) {
    throw std::invalid_argument("onestep_indirect_std: eps_trunc must be in (0, 0.5)");
  }
  const long n = data.n_rows();
  const Eigen::VectorXd y = data.outcome();
  const Eigen::VectorXd a = data.treatment();
  const int d_count = require_categorical(a, data.roles().treatment);
  const Eigen::MatrixXd X_raw = data.covariate_matrix();
  const Eigen::MatrixXd X = learners.squared_terms ? with_squared_terms(X_raw) : X_raw;

  std::vector<long> level_counts(static_cast<std::size_t>(d_count), 0);
  for (long i = 0; i < n; ++i) ++level_counts[static_cast<std::size_t>(a[i]) - 1];
  for (int d = 0; d < d_count; ++d) {
    if (level_counts[static_cast<std::size_t>(d)] == 0) {
      throw positivity_error("onestep_indirect_std: provider " + std::to_string(d + 1) +
                             " has no observations");
    }
    if (level_counts[static_cast<std::size_t>(d)] < K) {
      throw fold_stratification_error("onestep_indirect_std: provider " + std::to_string(d + 1) +
                                      " has fewer rows than K = " + std::to_string(K));
    }
  }

  std::vector<int> strata(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = static_cast<int>(a[i]);

  OneStepResult res;
  res.folds = make_folds(n, K, seed, &strata);
  const auto fold_rows = res.folds.fold_indices();

  Eigen::VectorXd p_hat(d_count);
  for (int d = 0; d < d_count; ++d) {
    p_hat[d] = static_cast<double>(level_counts[static_cast<std::size_t>(d)]) /
               static_cast<double>(n);
  }

  res.diag.fold_plugin.resize(K, d_count);
  res.diag.fold_correction.resize(K, d_count);
  res.diag.fold_estimate.resize(K, d_count);
  res.diag.fold_weight.resize(K, d_count);

  // Cross-fitted nuisance evaluations for every row.
  Eigen::VectorXd mu_eval(n);
  Eigen::MatrixXd pi_eval(n, d_count);

  LearnerConfig outcome_cfg = learners;
  outcome_cfg.squared_terms = false;
  LearnerConfig prop_cfg = learners;
  prop_cfg.kind = LearnerKind::logistic;
  prop_cfg.squared_terms = false;

  for (int k = 0; k < K; ++k) {
    std::vector<long> train;
    train.reserve(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) {
      if (res.folds.fold_of[static_cast<std::size_t>(i)] != k) train.push_back(i);
    }
    const auto& eval = fold_rows[static_cast<std::size_t>(k)];
    const Eigen::MatrixXd X_tr = rows_of(X, train);
    const Eigen::MatrixXd X_ev = rows_of(X, eval);

    const NuisanceFit mu_fit = fit(X_tr, elems_of(y, train), outcome_cfg);
    const Eigen::VectorXd mu_ev = mu_fit.predict(X_ev);
    for (std::size_t i = 0; i < eval.size(); ++i) {
      mu_eval[eval[i]] = mu_ev[static_cast<Eigen::Index>(i)];
    }

    // One-vs-rest propensities per provider, truncated from below.
    const Eigen::MatrixXd Xr_tr = rows_of(X_raw, train);
    const Eigen::MatrixXd Xr_ev = rows_of(X_raw, eval);
    for (int d = 0; d < d_count; ++d) {
      if (d_count == 1) {
        for (std::size_t i = 0; i < eval.size(); ++i) pi_eval(eval[i], 0) = 1.0;
        continue;
      }
      Eigen::VectorXd indicator(static_cast<Eigen::Index>(train.size()));
      for (std::size_t i = 0; i < train.size(); ++i) {
        indicator[static_cast<Eigen::Index>(i)] = a[train[i]] == d + 1 ? 1.0 : 0.0;
      }
      const NuisanceFit pi_fit = fit_logistic(Xr_tr, indicator, prop_cfg);
      const Eigen::VectorXd pi_ev = pi_fit.predict(Xr_ev);
      for (std::size_t i = 0; i < eval.size(); ++i) {
        pi_eval(eval[i], d) = std::max(eps_trunc, pi_ev[static_cast<Eigen::Index>(i)]);
      }
    }

    for (int d = 0; d < d_count; ++d) {
      double plugin = 0.0;
      long plugin_count = 0;
      double correction = 0.0;
      for (long i : eval) {
        if (static_cast<int>(a[i]) == d + 1) {
          plugin += mu_eval[i];
          ++plugin_count;
        }
        correction += pi_eval(i, d) * (y[i] - mu_eval[i]);
      }
      plugin /= static_cast<double>(plugin_count);
      correction /= static_cast<double>(eval.size()) * p_hat[d];
      res.diag.fold_plugin(k, d) = plugin;
      res.diag.fold_correction(k, d) = correction;
      res.diag.fold_estimate(k, d) = plugin + correction;
      res.diag.fold_weight(k, d) =
          static_cast<double>(eval.size()) / static_cast<double>(n);
    }
  }

  Eigen::VectorXd psi(d_count);
  for (int d = 0; d < d_count; ++d) {
    psi[d] = res.diag.fold_weight.col(d).dot(res.diag.fold_estimate.col(d));
  }

  res.eif.values.resize(n, d_count);
  for (long i = 0; i < n; ++i) {
    for (int d = 0; d < d_count; ++d) {
      const double indicator = static_cast<int>(a[i]) == d + 1 ? 1.0 : 0.0;
      res.eif.values(i, d) =
          (pi_eval(i, d) * (y[i] - mu_eval[i]) + indicator * (mu_eval[i] - psi[d])) / p_hat[d];
    }
  }
  res.eif.center();

  res.est.psi = psi;
  res.est.eif_var = eif_variance(res.eif);
  res.est.n = n;
  return res;
}

EstimateSet srr(const EstimateSet& est, const Eigen::VectorXd& observed_mean) {
  est.validate();
  if (observed_mean.size() != est.dim()) {
    throw std::invalid_argument("srr: observed_mean length must match the estimate dimension");
  }
  EstimateSet out = est;
  for (Eigen::Index d = 0; d < est.dim(); ++d) {
    if (observed_mean[d] == 0.0) {
      const std::string who = est.labels.empty() ? std::to_string(d + 1)
                                                 : est.labels[static_cast<std::size_t>(d)];
      throw std::domain_error("srr: provider " + who + " has zero observed mean");
    }
    out.psi[d] = est.psi[d] / observed_mean[d] - 1.0;
    out.eif_var[d] = est.eif_var[d] / (observed_mean[d] * observed_mean[d]);
  }
  return out;
}

}  // namespace shrinkfit

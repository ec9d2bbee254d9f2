#include "shrinkfit/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/penalty.hpp"

namespace shrinkfit {

std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::ols: return "ols";
    case LearnerKind::ridge: return "ridge";
    case LearnerKind::lasso: return "lasso";
    case LearnerKind::logistic: return "logistic";
    case LearnerKind::logistic_lasso: return "logistic_lasso";
    case LearnerKind::group_mean: return "group_mean";
  }
  return "ols";
}

LearnerKind learner_kind_from_string(const std::string& name) {
  if (name == "ols") return LearnerKind::ols;
  if (name == "ridge") return LearnerKind::ridge;
  if (name == "lasso") return LearnerKind::lasso;
  if (name == "logistic") return LearnerKind::logistic;
  if (name == "logistic_lasso") return LearnerKind::logistic_lasso;
  if (name == "group_mean") return LearnerKind::group_mean;
  throw std::invalid_argument("unknown learner kind: " + name);
}

namespace {

constexpr double kProbClamp = 1e-6;

double clamp_prob(double p) { return std::min(1.0 - kProbClamp, std::max(kProbClamp, p)); }

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Centered/scaled design for the penalized fits. Constant columns get
// sd = 0 and are frozen at coefficient zero.
struct Standardized {
  Eigen::MatrixXd X;
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
  Eigen::VectorXd y;  // centered
  double y_mean = 0.0;
};

Standardized standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Standardized s;
  const double n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean();
  s.X = X.rowwise() - s.mean.transpose();
  s.sd.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double v = s.X.col(j).squaredNorm() / n;
    s.sd[j] = std::sqrt(v);
    if (s.sd[j] > 0.0) {
      s.X.col(j) /= s.sd[j];
    } else {
      s.X.col(j).setZero();
    }
  }
  s.y_mean = y.mean();
  s.y = y.array() - s.y_mean;
  return s;
}

// Coefficients back on the original scale.
void destandardize(const Standardized& s, const Eigen::VectorXd& beta_std, NuisanceFit& fit) {
  fit.coef.resize(beta_std.size());
  for (Eigen::Index j = 0; j < beta_std.size(); ++j) {
    fit.coef[j] = s.sd[j] > 0.0 ? beta_std[j] / s.sd[j] : 0.0;
  }
  fit.intercept = s.y_mean - fit.coef.dot(s.mean);
}

std::vector<double> default_lambda_grid(double lambda_max, int points = 100) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  if (lambda_max <= 0.0) lambda_max = 1.0;
  const double lo = std::log(1e-4 * lambda_max);
  const double hi = std::log(lambda_max);
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] =
        std::exp(hi + (lo - hi) * i / static_cast<double>(points - 1));
  }
  return grid;
}

// One pass of cyclic coordinate descent on standardized data; updates
// beta and the residual in place, returns the largest coefficient move.
double cd_sweep(const Eigen::MatrixXd& X, Eigen::VectorXd& r, Eigen::VectorXd& beta, double lambda,
                double n, const std::vector<char>& in_scope) {
  double max_delta = 0.0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    if (!in_scope[static_cast<std::size_t>(j)]) continue;
    const double old = beta[j];
    const double rho = old + X.col(j).dot(r) / n;
    const double updated = soft_threshold(rho, lambda);
    if (updated != old) {
      r += X.col(j) * (old - updated);
      beta[j] = updated;
      max_delta = std::max(max_delta, std::abs(updated - old));
    }
  }
  return max_delta;
}

// Full lasso path over a descending grid with warm starts. The sweep
// tolerance is objective-scaled, and the path freezes once the explained
// variance saturates (fractional deviance change below 1e-5), so the
// ill-conditioned tail of the grid costs nothing. Returns the
// standardized coefficients at every grid point (frozen entries repeat
// the last computed solution; fit_lasso polishes the one it returns).
std::vector<Eigen::VectorXd> lasso_path(const Standardized& s, const std::vector<double>& grid,
                                        int max_iter, double conv_tol) {
  const double n = static_cast<double>(s.X.rows());
  const Eigen::Index p = s.X.cols();
  std::vector<char> all(static_cast<std::size_t>(p), 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    all[static_cast<std::size_t>(j)] = s.sd[j] > 0.0 ? 1 : 0;
  }

  const double var_y = s.y.squaredNorm() / n;
  const double tol = std::sqrt(std::max(conv_tol, 1e-14) * std::max(var_y, 1e-300));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = s.y;
  std::vector<Eigen::VectorXd> path;
  path.reserve(grid.size());

  double prev_dev = 0.0;
  bool frozen = false;
  for (double lambda : grid) {
    if (frozen) {
      path.push_back(beta);
      continue;
    }
    int iters = 0;
    for (;;) {
      std::vector<char> active = all;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (beta[j] == 0.0) active[static_cast<std::size_t>(j)] = 0;
      }
      double delta;
      do {
        delta = cd_sweep(s.X, r, beta, lambda, n, active);
        if (++iters > max_iter) {
          throw convergence_error("fit_lasso: coordinate descent exceeded max_iter at lambda = " +
                                  std::to_string(lambda));
        }
      } while (delta >= tol);
      const double full_delta = cd_sweep(s.X, r, beta, lambda, n, all);
      if (++iters > max_iter) {
        throw convergence_error("fit_lasso: coordinate descent exceeded max_iter at lambda = " +
                                std::to_string(lambda));
      }
      if (full_delta < tol) break;
    }
    path.push_back(beta);

    const double dev = var_y - r.squaredNorm() / n;
    if (!path.empty() && path.size() > 1) {
      if (dev - prev_dev < 1e-5 * std::max(dev, 1e-300) || dev > 0.999 * var_y) frozen = true;
    }
    prev_dev = dev;
  }
  return path;
}

// Tight single-penalty refinement, warm-started from a path solution.
void lasso_polish(const Standardized& s, double lambda, Eigen::VectorXd& beta, int max_iter,
                  double tol) {
  const double n = static_cast<double>(s.X.rows());
  const Eigen::Index p = s.X.cols();
  std::vector<char> all(static_cast<std::size_t>(p), 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    all[static_cast<std::size_t>(j)] = s.sd[j] > 0.0 ? 1 : 0;
  }
  Eigen::VectorXd r = s.y - s.X * beta;
  int iters = 0;
  double delta;
  do {
    delta = cd_sweep(s.X, r, beta, lambda, n, all);
    if (++iters > max_iter) {
      throw convergence_error("fit_lasso: polish exceeded max_iter at lambda = " +
                              std::to_string(lambda));
    }
  } while (delta >= tol);
}

double lasso_lambda_max(const Standardized& s) {
  const double n = static_cast<double>(s.X.rows());
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < s.X.cols(); ++j) {
    if (s.sd[j] > 0.0) lmax = std::max(lmax, std::abs(s.X.col(j).dot(s.y)) / n);
  }
  return lmax;
}

}  // namespace

double NuisanceFit::predict(const Eigen::RowVectorXd& x) const {
  if (kind == LearnerKind::group_mean) {
    throw std::invalid_argument("NuisanceFit: group_mean fits predict by group level");
  }
  const double eta = intercept + x * coef;
  return is_logistic() ? clamp_prob(sigmoid(eta)) : eta;
}

Eigen::VectorXd NuisanceFit::predict(const Eigen::MatrixXd& X) const {
  Eigen::VectorXd eta = (X * coef).array() + intercept;
  if (is_logistic()) {
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = clamp_prob(sigmoid(eta[i]));
  }
  return eta;
}

double NuisanceFit::predict_group(int group) const {
  if (kind != LearnerKind::group_mean) {
    throw std::invalid_argument("NuisanceFit: predict_group requires a group_mean fit");
  }
  if (group < 1 || group > group_means.size()) {
    throw std::invalid_argument("NuisanceFit: group level out of range");
  }
  return group_means[group - 1];
}

NuisanceFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_ols: X/y size mismatch");
  if (X.rows() <= X.cols() + 1) {
    throw insufficient_data_error(
        "fit_ols: need more rows than fitted parameters; use ridge or lasso");
  }
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(X.rows(), p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;

  const Eigen::MatrixXd gram = A.transpose() * A;
  const Eigen::VectorXd moment = A.transpose() * y;
  Eigen::VectorXd sol = gram.ldlt().solve(moment);

  // Rank-deficient designs leave a large normal-equation residual; retry
  // with a tiny ridge jitter.
  const double resid = (gram * sol - moment).norm();
  if (!sol.allFinite() || resid > 1e-6 * (1.0 + moment.norm())) {
    Eigen::MatrixXd jittered = gram;
    jittered.diagonal().array() += 1e-10 * (1.0 + gram.diagonal().mean());
    sol = jittered.ldlt().solve(moment);
  }

  NuisanceFit fit;
  fit.kind = LearnerKind::ols;
  fit.intercept = sol[0];
  fit.coef = sol.tail(p);
  return fit;
}

NuisanceFit fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const LearnerConfig& cfg) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_ridge: X/y size mismatch");
  if (cfg.cv_folds < 2) throw std::invalid_argument("fit_ridge: cv_folds must be >= 2");
  const long n = X.rows();
  const Eigen::Index p = X.cols();

  const Standardized full = standardize(X, y);
  std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid(lasso_lambda_max(full)) : cfg.lambda_grid;

  const auto solve_at = [p](const Standardized& s, double lambda) {
    const double nn = static_cast<double>(s.X.rows());
    Eigen::MatrixXd gram = s.X.transpose() * s.X / nn;
    gram.diagonal().array() += lambda;
    return Eigen::VectorXd(gram.ldlt().solve(s.X.transpose() * s.y / nn));
  };

  // Deterministic modulo folds; rows are exchangeable here.
  std::vector<double> cv_err(grid.size(), 0.0);
  for (int f = 0; f < cfg.cv_folds; ++f) {
    std::vector<long> train_rows, test_rows;
    for (long i = 0; i < n; ++i) {
      (i % cfg.cv_folds == f ? test_rows : train_rows).push_back(i);
    }
    Eigen::MatrixXd Xtr(train_rows.size(), p), Xte(test_rows.size(), p);
    Eigen::VectorXd ytr(train_rows.size()), yte(test_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train_rows[i]];
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test_rows[i]);
      yte[static_cast<Eigen::Index>(i)] = y[test_rows[i]];
    }
    const Standardized st = standardize(Xtr, ytr);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Eigen::VectorXd beta_std = solve_at(st, grid[g]);
      NuisanceFit tmp;
      tmp.kind = LearnerKind::ridge;
      destandardize(st, beta_std, tmp);
      cv_err[g] += (yte - tmp.predict(Xte)).squaredNorm();
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_err[g] < cv_err[best]) best = g;
  }

  NuisanceFit fit;
  fit.kind = LearnerKind::ridge;
  destandardize(full, solve_at(full, grid[best]), fit);
  fit.cv_lambda = grid[best];
  return fit;
}

NuisanceFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const LearnerConfig& cfg) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_lasso: X/y size mismatch");
  if (cfg.cv_folds < 2) throw std::invalid_argument("fit_lasso: cv_folds must be >= 2");
  if (cfg.conv_tol <= 0.0) throw std::invalid_argument("fit_lasso: conv_tol must be > 0");
  const long n = X.rows();
  const Eigen::Index p = X.cols();

  const Standardized full = standardize(X, y);
  std::vector<double> grid =
      cfg.lambda_grid.empty() ? default_lambda_grid(lasso_lambda_max(full)) : cfg.lambda_grid;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (grid[g] > grid[g - 1]) {
      throw std::invalid_argument("fit_lasso: lambda_grid must be sorted descending");
    }
  }

  std::vector<double> cv_err(grid.size(), 0.0);
  for (int f = 0; f < cfg.cv_folds; ++f) {
    std::vector<long> train_rows, test_rows;
    for (long i = 0; i < n; ++i) {
      (i % cfg.cv_folds == f ? test_rows : train_rows).push_back(i);
    }
    Eigen::MatrixXd Xtr(train_rows.size(), p), Xte(test_rows.size(), p);
    Eigen::VectorXd ytr(train_rows.size()), yte(test_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train_rows[i]];
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      Xte.row(static_cast<Eigen::Index>(i)) = X.row(test_rows[i]);
      yte[static_cast<Eigen::Index>(i)] = y[test_rows[i]];
    }
    const Standardized st = standardize(Xtr, ytr);
    const auto path = lasso_path(st, grid, cfg.max_iter, cfg.conv_tol);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      NuisanceFit tmp;
      tmp.kind = LearnerKind::lasso;
      destandardize(st, path[g], tmp);
      cv_err[g] += (yte - tmp.predict(Xte)).squaredNorm();
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_err[g] < cv_err[best]) best = g;
  }

  const auto path = lasso_path(full, grid, cfg.max_iter, cfg.conv_tol);
  Eigen::VectorXd beta_std = path[best];
  lasso_polish(full, grid[best], beta_std, cfg.max_iter, 0.01 * cfg.conv_tol);
  NuisanceFit fit;
  fit.kind = LearnerKind::lasso;
  destandardize(full, beta_std, fit);
  fit.cv_lambda = grid[best];
  return fit;
}

namespace {

struct IrlsResult {
  Eigen::VectorXd sol;  // intercept first
  bool converged = false;
  bool diverged = false;
};

IrlsResult irls(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double ridge, double conv_tol,
                int max_iter) {
  const Eigen::Index q = A.cols();
  const double n = static_cast<double>(A.rows());
  IrlsResult res;
  res.sol = Eigen::VectorXd::Zero(q);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd eta = A * res.sol;
    Eigen::VectorXd prob(eta.size()), w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double pi = sigmoid(eta[i]);
      prob[i] = pi;
      w[i] = std::max(pi * (1.0 - pi), 1e-10);
    }
    Eigen::VectorXd grad = A.transpose() * (y - prob);
    if (ridge > 0.0) grad.tail(q - 1) -= ridge * res.sol.tail(q - 1);
    if (grad.lpNorm<Eigen::Infinity>() < conv_tol * n) {
      res.converged = true;
      return res;
    }
    Eigen::MatrixXd hess = A.transpose() * w.asDiagonal() * A;
    if (ridge > 0.0) {
      hess.diagonal().tail(q - 1).array() += ridge;
    }
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    if (!step.allFinite()) {
      res.diverged = true;
      return res;
    }
    res.sol += step;
    if (res.sol.lpNorm<Eigen::Infinity>() > 30.0 && ridge == 0.0) {
      res.diverged = true;  // separation signature
      return res;
    }
  }
  return res;
}

NuisanceFit logistic_lasso_impl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const LearnerConfig& cfg);

}  // namespace

NuisanceFit fit_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const LearnerConfig& cfg) {
  if (X.rows() != y.size()) throw std::invalid_argument("fit_logistic: X/y size mismatch");
  bool any0 = false, any1 = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) {
      any0 = true;
    } else if (y[i] == 1.0) {
      any1 = true;
    } else {
      throw std::invalid_argument("fit_logistic: outcome must be binary {0,1}");
    }
  }
  if (!any0 || !any1) {
    throw std::invalid_argument("fit_logistic: both classes must be present");
  }

  if (cfg.kind == LearnerKind::logistic_lasso) return logistic_lasso_impl(X, y, cfg);

  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(X.rows(), p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;

  const int iters = std::min(cfg.max_iter, 200);
  IrlsResult res = irls(A, y, 0.0, cfg.conv_tol, iters);
  NuisanceFit fit;
  fit.kind = LearnerKind::logistic;
  if (!res.converged) {
    // Separation (or a very flat likelihood): stabilize with a small
    // ridge penalty and flag the fit.
    res = irls(A, y, 1e-3 * static_cast<double>(X.rows()), cfg.conv_tol, iters);
    fit.separation_warning = true;
    if (!res.converged && !res.sol.allFinite()) {
      throw convergence_error("fit_logistic: IRLS failed to converge");
    }
  }
  fit.intercept = res.sol[0];
  fit.coef = res.sol.tail(p);
  return fit;
}

namespace {

NuisanceFit logistic_lasso_impl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const LearnerConfig& cfg) {
  const long n = X.rows();
  const Eigen::Index p = X.cols();
  const double nn = static_cast<double>(n);

  const auto log_loss = [](double yy, double prob) {
    const double pc = clamp_prob(prob);
    return -(yy * std::log(pc) + (1.0 - yy) * std::log(1.0 - pc));
  };

  // Penalized proximal-Newton: repeat { IRLS working response; weighted
  // coordinate descent } at one lambda, warm-started along the grid.
  const auto fit_at = [&](const Eigen::MatrixXd& Xs, const Eigen::VectorXd& ys,
                          const std::vector<double>& grid) {
    const Standardized st = standardize(Xs, ys);
    const double m = static_cast<double>(Xs.rows());
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double b0 = std::log(clamp_prob(ys.mean()) / (1.0 - clamp_prob(ys.mean())));
    std::vector<std::pair<Eigen::VectorXd, double>> path;  // (std coefs, intercept on std scale)
    for (double lambda : grid) {
      for (int outer = 0; outer < 50; ++outer) {
        Eigen::VectorXd eta = (st.X * beta).array() + b0;
        Eigen::VectorXd w(eta.size()), z(eta.size());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
          const double pi = clamp_prob(sigmoid(eta[i]));
          w[i] = std::max(pi * (1.0 - pi), 1e-6);
          z[i] = eta[i] + (ys[i] - pi) / w[i];
        }
        // Weighted CD on the working response.
        Eigen::VectorXd r = z - eta;
        double max_move = 0.0;
        for (int sweep = 0; sweep < 200; ++sweep) {
          max_move = 0.0;
          for (Eigen::Index j = 0; j < p; ++j) {
            if (st.sd[j] <= 0.0) continue;
            const double denom = st.X.col(j).cwiseAbs2().dot(w) / m;
            if (denom <= 0.0) continue;
            const double rho = (st.X.col(j).cwiseProduct(w)).dot(r) / m + denom * beta[j];
            const double updated = soft_threshold(rho, lambda) / denom;
            if (updated != beta[j]) {
              r += st.X.col(j) * (beta[j] - updated);
              max_move = std::max(max_move, std::abs(updated - beta[j]));
              beta[j] = updated;
            }
          }
          const double b0_new = b0 + w.dot(r) / w.sum();
          r.array() -= (b0_new - b0);
          max_move = std::max(max_move, std::abs(b0_new - b0));
          b0 = b0_new;
          if (max_move < std::max(cfg.conv_tol, 1e-9)) break;
        }
        if (max_move < std::max(cfg.conv_tol, 1e-7)) break;
      }
      path.emplace_back(beta, b0);
    }
    return std::make_pair(st, path);
  };

  const Standardized full = standardize(X, y);
  Eigen::VectorXd y_centered = y.array() - y.mean();
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (full.sd[j] > 0.0) lmax = std::max(lmax, std::abs(full.X.col(j).dot(y_centered)) / nn);
  }
  std::vector<double> grid = cfg.lambda_grid.empty() ? default_lambda_grid(lmax) : cfg.lambda_grid;

  std::vector<double> cv_err(grid.size(), 0.0);
  for (int f = 0; f < cfg.cv_folds; ++f) {
    std::vector<long> train_rows, test_rows;
    for (long i = 0; i < n; ++i) {
      (i % cfg.cv_folds == f ? test_rows : train_rows).push_back(i);
    }
    Eigen::MatrixXd Xtr(train_rows.size(), p);
    Eigen::VectorXd ytr(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      Xtr.row(static_cast<Eigen::Index>(i)) = X.row(train_rows[i]);
      ytr[static_cast<Eigen::Index>(i)] = y[train_rows[i]];
    }
    bool tr0 = false, tr1 = false;
    for (Eigen::Index i = 0; i < ytr.size(); ++i) (ytr[i] == 0.0 ? tr0 : tr1) = true;
    if (!tr0 || !tr1) continue;  // degenerate CV split; skip its vote
    const auto [st, path] = fit_at(Xtr, ytr, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      NuisanceFit tmp;
      tmp.kind = LearnerKind::logistic_lasso;
      destandardize(st, path[g].first, tmp);
      tmp.intercept = path[g].second - (tmp.coef.dot(st.mean));
      for (long i : test_rows) {
        cv_err[static_cast<std::size_t>(g)] +=
            log_loss(y[i], tmp.predict(Eigen::RowVectorXd(X.row(i))));
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_err[g] < cv_err[best]) best = g;
  }

  const auto [st, path] = fit_at(X, y, grid);
  NuisanceFit fit;
  fit.kind = LearnerKind::logistic_lasso;
  destandardize(st, path[best].first, fit);
  fit.intercept = path[best].second - fit.coef.dot(st.mean);
  fit.cv_lambda = grid[best];
  return fit;
}

}  // namespace

NuisanceFit fit_group_mean(const std::vector<int>& groups, const Eigen::VectorXd& y) {
  if (static_cast<Eigen::Index>(groups.size()) != y.size() || groups.empty()) {
    throw std::invalid_argument("fit_group_mean: group/outcome size mismatch");
  }
  int d_count = 0;
  for (int g : groups) {
    if (g < 1) throw std::invalid_argument("fit_group_mean: group levels must be >= 1");
    d_count = std::max(d_count, g);
  }

  NuisanceFit fit;
  fit.kind = LearnerKind::group_mean;
  fit.group_means = Eigen::VectorXd::Zero(d_count);
  fit.group_freqs = Eigen::VectorXd::Zero(d_count);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(d_count);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const int g = groups[i] - 1;
    counts[g] += 1.0;
    fit.group_means[g] += y[static_cast<Eigen::Index>(i)];
  }
  for (int g = 0; g < d_count; ++g) {
    if (counts[g] == 0.0) {
      throw empty_cell_error("fit_group_mean: group " + std::to_string(g + 1) + " is empty");
    }
    fit.group_means[g] /= counts[g];
    fit.group_freqs[g] = counts[g] / static_cast<double>(groups.size());
  }
  return fit;
}

NuisanceFit fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LearnerConfig& cfg) {
  switch (cfg.kind) {
    case LearnerKind::ols: return fit_ols(X, y);
    case LearnerKind::ridge: return fit_ridge(X, y, cfg);
    case LearnerKind::lasso: return fit_lasso(X, y, cfg);
    case LearnerKind::logistic:
    case LearnerKind::logistic_lasso: return fit_logistic(X, y, cfg);
    case LearnerKind::group_mean:
      throw std::invalid_argument("fit: group_mean requires fit_group_mean(groups, y)");
  }
  throw std::invalid_argument("fit: unknown learner kind");
}

Eigen::MatrixXd with_squared_terms(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd out(X.rows(), 2 * X.cols());
  out.leftCols(X.cols()) = X;
  out.rightCols(X.cols()) = X.array().square();
  return out;
}

GramCache GramCache::build(const Eigen::MatrixXd& X) {
  GramCache g;
  g.n = X.rows();
  const double n = static_cast<double>(g.n);
  g.mean = X.colwise().mean();
  g.Xs = X.rowwise() - g.mean.transpose();
  g.sd.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    g.sd[j] = std::sqrt(g.Xs.col(j).squaredNorm() / n);
    if (g.sd[j] > 0.0) {
      g.Xs.col(j) /= g.sd[j];
    } else {
      g.Xs.col(j).setZero();
    }
  }
  g.gram.noalias() = g.Xs.transpose() * g.Xs / n;
  return g;
}

Eigen::VectorXd GramCache::moments(const Eigen::VectorXd& t) const {
  const Eigen::VectorXd centered = t.array() - t.mean();
  return Eigen::VectorXd(Xs.transpose() * centered / static_cast<double>(n));
}

Eigen::MatrixXd GramCache::standardize_rows(const Eigen::MatrixXd& X_rows) const {
  Eigen::MatrixXd out = X_rows.rowwise() - mean.transpose();
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    if (sd[j] > 0.0) {
      out.col(j) /= sd[j];
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

namespace {

// Coordinate update in covariance form. Unit diagonal on live columns
// makes the update a plain soft-threshold; a move propagates through
// `fitted` (= gram * beta) at O(p).
inline double gram_update(const GramCache& cache, const Eigen::VectorXd& c, Eigen::VectorXd& beta,
                          Eigen::VectorXd& fitted, Eigen::Index j, double lambda) {
  const double rho = c[j] - fitted[j] + beta[j];
  const double nb = soft_threshold(rho, lambda);
  const double delta = nb - beta[j];
  if (delta != 0.0) {
    fitted.noalias() += cache.gram.col(j) * delta;
    beta[j] = nb;
  }
  return std::abs(delta);
}

}  // namespace

std::vector<Eigen::VectorXd> gram_lasso_path(const GramCache& cache, const Eigen::VectorXd& c,
                                             Eigen::Index skip, const std::vector<double>& grid,
                                             int max_iter, double conv_tol, double target_var) {
  const Eigen::Index p = cache.gram.rows();
  if (c.size() != p) throw std::invalid_argument("gram_lasso_path: moment length mismatch");

  std::vector<char> usable(static_cast<std::size_t>(p), 1);
  for (Eigen::Index j = 0; j < p; ++j) {
    usable[static_cast<std::size_t>(j)] = (cache.sd[j] > 0.0 && j != skip) ? 1 : 0;
  }

  const double tol =
      std::sqrt(std::max(conv_tol, 1e-14) * std::max(target_var, 1e-300));

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(p);
  std::vector<Eigen::VectorXd> out;
  out.reserve(grid.size());

  double prev_dev = 0.0;
  bool frozen = false;
  for (double lambda : grid) {
    if (frozen) {
      out.push_back(beta);
      continue;
    }
    int iters = 0;
    for (;;) {
      double delta;
      do {
        delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
          if (usable[static_cast<std::size_t>(j)] && beta[j] != 0.0) {
            delta = std::max(delta, gram_update(cache, c, beta, fitted, j, lambda));
          }
        }
        if (++iters > max_iter) {
          throw convergence_error("gram_lasso_path: exceeded max_iter at lambda = " +
                                  std::to_string(lambda));
        }
      } while (delta >= tol);
      double full_delta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (usable[static_cast<std::size_t>(j)]) {
          full_delta = std::max(full_delta, gram_update(cache, c, beta, fitted, j, lambda));
        }
      }
      if (++iters > max_iter) {
        throw convergence_error("gram_lasso_path: exceeded max_iter at lambda = " +
                                std::to_string(lambda));
      }
      if (full_delta < tol) break;
    }
    out.push_back(beta);

    const double dev = beta.dot(2.0 * c - fitted);
    if (out.size() > 1) {
      if (dev - prev_dev < 1e-5 * std::max(dev, 1e-300) || dev > 0.999 * target_var) {
        frozen = true;
      }
    }
    prev_dev = dev;
  }
  return out;
}

void gram_lasso_polish(const GramCache& cache, const Eigen::VectorXd& c, Eigen::Index skip,
                       double lambda, Eigen::VectorXd& beta, int max_iter, double tol) {
  const Eigen::Index p = cache.gram.rows();
  Eigen::VectorXd fitted = cache.gram * beta;
  int iters = 0;
  double delta;
  do {
    delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (cache.sd[j] > 0.0 && j != skip) {
        delta = std::max(delta, gram_update(cache, c, beta, fitted, j, lambda));
      }
    }
    if (++iters > max_iter) {
      throw convergence_error("gram_lasso_polish: exceeded max_iter at lambda = " +
                              std::to_string(lambda));
    }
  } while (delta >= tol);
}

std::vector<double> lasso_default_grid(double lambda_max, int points) {
  return default_lambda_grid(lambda_max, points);
}

}  // namespace shrinkfit

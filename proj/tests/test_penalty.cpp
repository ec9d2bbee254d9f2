#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/estimates.hpp"
#include "shrinkfit/normal.hpp"
#include "shrinkfit/penalty.hpp"
#include "shrinkfit/rng.hpp"

using namespace shrinkfit;

namespace {

EstimateSet make_est(std::initializer_list<double> psi, std::initializer_list<double> var,
                     long n) {
  EstimateSet e;
  e.psi = Eigen::VectorXd(static_cast<long>(psi.size()));
  e.eif_var = Eigen::VectorXd(static_cast<long>(var.size()));
  long i = 0;
  for (double v : psi) e.psi[i++] = v;
  i = 0;
  for (double v : var) e.eif_var[i++] = v;
  e.n = n;
  return e;
}

struct McMoments {
  double mean, var, se_mean, se_var;
};

// Monte Carlo oracle for the soft-thresholded normal moments.
McMoments mc_st_moments(double mu, double var, double lambda, long draws, std::uint64_t seed) {
  Rng rng(seed);
  const double sd = std::sqrt(var);
  double sum = 0.0, sum2 = 0.0, sum3 = 0.0, sum4 = 0.0;
  std::vector<double> xs(static_cast<std::size_t>(draws));
  for (long i = 0; i < draws; ++i) {
    const double z = soft_threshold(mu + sd * rng.normal(), lambda);
    xs[static_cast<std::size_t>(i)] = z;
    sum += z;
  }
  const double mean = sum / static_cast<double>(draws);
  for (double z : xs) {
    const double c = z - mean;
    sum2 += c * c;
    sum3 += c * c * c;
    sum4 += c * c * c * c;
  }
  const double m2 = sum2 / static_cast<double>(draws);
  const double m4 = sum4 / static_cast<double>(draws);
  McMoments out;
  out.mean = mean;
  out.var = m2;
  out.se_mean = std::sqrt(m2 / static_cast<double>(draws));
  out.se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(draws));
  return out;
}

// Independent arithmetic route for the L2 criterion.
double l2_crit_alt(double lambda, const EstimateSet& e) {
  const double a = e.psi.squaredNorm();
  const double b = e.eif_var.sum() / static_cast<double>(e.n);
  return (lambda * lambda * a + b) / ((1.0 + lambda) * (1.0 + lambda));
}

double grid_argmin_l2(const EstimateSet& e, double hi = 10.0, double step = 1e-5) {
  const double a = e.psi.squaredNorm();
  const double b = e.eif_var.sum() / static_cast<double>(e.n);
  double best_arg = 0.0, best = b;
  const long steps = static_cast<long>(hi / step);
  for (long k = 1; k <= steps; ++k) {
    const double lam = static_cast<double>(k) * step;
    const double val = (lam * lam * a + b) / ((1.0 + lam) * (1.0 + lam));
    if (val < best) {
      best = val;
      best_arg = lam;
    }
  }
  return best_arg;
}

}  // namespace

TEST_CASE("soft_threshold branches") {
  CHECK(soft_threshold(2.0, 0.5) == doctest::Approx(1.5));
  CHECK(soft_threshold(0.3, 0.5) == 0.0);
  CHECK(soft_threshold(-2.0, 0.5) == doctest::Approx(-1.5));
  CHECK(soft_threshold(0.5, 0.5) == 0.0);   // boundary |x| = lambda
  CHECK(soft_threshold(-0.5, 0.5) == 0.0);
  CHECK_THROWS_AS(soft_threshold(1.0, -0.1), std::invalid_argument);

  Eigen::VectorXd v(3);
  v << 0.1, 0.2, 5.0;
  const Eigen::VectorXd out = soft_threshold(v, 0.3);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == doctest::Approx(4.7));
}

TEST_CASE("st_normal_moments: degenerate and identity limits") {
  auto [m0, v0] = st_normal_moments(1.0, 0.0, 0.4);
  CHECK(m0 == doctest::Approx(0.6));
  CHECK(v0 == 0.0);

  auto [m1, v1] = st_normal_moments(0.7, 2.3, 0.0);
  CHECK(m1 == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(v1 == doctest::Approx(2.3).epsilon(1e-12));

  CHECK_THROWS_AS(st_normal_moments(0.0, -1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(st_normal_moments(0.0, 1.0, -0.1), std::invalid_argument);
}

TEST_CASE("st_normal_moments vs 1e7-draw Monte Carlo oracle") {
  const auto mc = mc_st_moments(0.5, 1.0, 1.0, 10'000'000, 20260810u);
  auto [mean, var] = st_normal_moments(0.5, 1.0, 1.0);
  CHECK(std::abs(mean - mc.mean) < 4.0 * mc.se_mean);
  CHECK(std::abs(var - mc.var) < 4.0 * mc.se_var);
}

TEST_CASE("st_normal_moments: random triples vs Monte Carlo") {
  Rng rng(7u);
  for (int t = 0; t < 10; ++t) {
    const double mu = rng.uniform(-3.0, 3.0);
    const double var = rng.uniform(0.01, 4.0);
    const double lambda = rng.uniform(0.0, 3.0);
    const auto mc = mc_st_moments(mu, var, lambda, 1'000'000, 1000u + static_cast<unsigned>(t));
    auto [mean, variance] = st_normal_moments(mu, var, lambda);
    CAPTURE(mu);
    CAPTURE(var);
    CAPTURE(lambda);
    CHECK(std::abs(mean - mc.mean) < 4.0 * mc.se_mean);
    CHECK(std::abs(variance - mc.var) < 4.0 * mc.se_var);
  }
}

TEST_CASE("gamma definition and degenerate input") {
  CHECK(gamma(make_est({1, 1}, {2, 2}, 10)) == doctest::Approx(2.0));
  CHECK(gamma(make_est({3, 4}, {0, 0}, 10)) == 0.0);
  CHECK_THROWS_AS(gamma(make_est({0, 0}, {1, 1}, 10)), degenerate_parameter_error);
}

TEST_CASE("l2_crit values and asymptote") {
  const auto e = make_est({1, 1}, {1, 1}, 100);
  CHECK(l2_crit(0.0, e) == doctest::Approx(0.02));
  CHECK(l2_crit(1e9, e) == doctest::Approx(e.psi.squaredNorm()).epsilon(1e-6));
  // independent re-implementation of the same formula
  CHECK(l2_crit(0.01, e) == doctest::Approx(l2_crit_alt(0.01, e)).epsilon(1e-14));
  CHECK_THROWS_AS(l2_crit(-0.5, e), std::invalid_argument);
}

TEST_CASE("l2_lambda_star closed form and grid oracle") {
  CHECK(l2_lambda_star(make_est({1, 1}, {1, 1}, 100)) == doctest::Approx(0.01));
  CHECK(l2_lambda_star(make_est({2, 3}, {0, 0}, 50)) == 0.0);

  const auto e = make_est({0.5, -1.2, 0.0}, {1.0, 0.25, 4.0}, 200);
  const double closed = l2_lambda_star(e);
  const double grid = grid_argmin_l2(e);
  CHECK(std::abs(closed - grid) < 2e-5);
}

TEST_CASE("l2_shrink: scaling, identity, and CI arithmetic") {
  auto e = make_est({2, -4}, {1, 1}, 100);
  const auto pe = l2_shrink(e, 1.0);
  CHECK(pe.psi_tilde[0] == doctest::Approx(1.0));
  CHECK(pe.psi_tilde[1] == doctest::Approx(-2.0));
  CHECK(pe.shrink_factor[0] == doctest::Approx(0.5));
  CHECK(pe.shrink_factor[1] == doctest::Approx(0.5));

  const auto id = l2_shrink(e, 0.0);
  CHECK(id.psi_tilde == e.psi);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(id.ci_basic[d].lo == doctest::Approx(id.ci_shrunk[d].lo));
    CHECK(id.ci_basic[d].hi == doctest::Approx(id.ci_shrunk[d].hi));
  }

  const auto e2 = make_est({1, 1}, {1, 1}, 100);
  const auto pe2 = l2_shrink(e2, l2_lambda_star(e2), 0.05);
  const double center = 1.0 / 1.01;
  const double hw = 1.959964 * 0.1;
  CHECK(pe2.ci_basic[0].lo == doctest::Approx(center - hw).epsilon(1e-6));
  CHECK(pe2.ci_basic[0].hi == doctest::Approx(center + hw).epsilon(1e-6));
  // shrunk family is narrower by exactly the shrinkage factor
  CHECK(pe2.ci_shrunk[0].width() ==
        doctest::Approx(pe2.ci_basic[0].width() / 1.01).epsilon(1e-12));
}

TEST_CASE("l1_crit endpoints") {
  const auto e = make_est({0.0, 2.0}, {1, 1}, 25);
  CHECK(l1_crit(0.0, e) == doctest::Approx(2.0 / 25.0).epsilon(1e-12));
  const double far = e.psi.cwiseAbs().maxCoeff() + 40.0 * std::sqrt(1.0 / 25.0);
  CHECK(l1_crit(far, e) == doctest::Approx(e.psi.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("l1_crit vs Monte Carlo MSE oracle") {
  const auto e = make_est({0.0, 2.0}, {1, 1}, 25);
  const double lambda = 0.3;
  const long draws = 1'000'000;
  Rng rng(99u);
  double sum = 0.0, sum_sq = 0.0;
  for (long i = 0; i < draws; ++i) {
    double total = 0.0;
    for (int d = 0; d < 2; ++d) {
      const double draw = e.psi[d] + std::sqrt(e.eif_var[d] / 25.0) * rng.normal();
      const double err = soft_threshold(draw, lambda) - e.psi[d];
      total += err * err;
    }
    sum += total;
    sum_sq += total * total;
  }
  const double mc = sum / static_cast<double>(draws);
  const double se =
      std::sqrt((sum_sq / static_cast<double>(draws) - mc * mc) / static_cast<double>(draws));
  CHECK(std::abs(l1_crit(lambda, e) - mc) < 4.0 * se);
}

TEST_CASE("l1_lambda_star: exact zero at zero noise") {
  CHECK(l1_lambda_star(make_est({1.5, -0.4}, {0, 0}, 100)) == 0.0);
}

TEST_CASE("l1_lambda_star: tiny for precise estimates") {
  const double lam = l1_lambda_star(make_est({10.0}, {1.0}, 10000));
  CHECK(lam < 1e-2);
}

TEST_CASE("l1_lambda_star vs dense-grid oracle") {
  const auto e = make_est({0, 0, 0, 2}, {1, 1, 1, 1}, 25);
  SearchConfig search;
  bool flat = false;
  const double lam = l1_lambda_star(e, search, &flat);
  CHECK(!flat);
  CHECK(lam > 0.0);

  double oracle_min = l1_crit(0.0, e);
  for (double x = 1e-4; x <= 3.2; x += 1e-4) {
    oracle_min = std::min(oracle_min, l1_crit(x, e));
  }
  const double tol = 1e-6 * (l1_crit(0.0, e) + 1e-12);
  CHECK(l1_crit(lam, e) <= oracle_min + tol);
}

TEST_CASE("l1_lambda_star: all-zero estimates need a cap") {
  auto e = make_est({0, 0}, {1, 1}, 25);
  CHECK_THROWS_AS(l1_lambda_star(e), degenerate_parameter_error);

  SearchConfig capped;
  capped.cap = 1.0;
  bool flat = false;
  const double lam = l1_lambda_star(e, capped, &flat);
  CHECK(flat);
  CHECK(lam == doctest::Approx(1.0));
}

TEST_CASE("l1_shrink: thresholding, identity, sparsity") {
  const auto pe = l1_shrink(make_est({0.2, -3.0}, {1, 1}, 50), 0.5);
  CHECK(pe.psi_tilde[0] == 0.0);
  CHECK(pe.psi_tilde[1] == doctest::Approx(-2.5));
  CHECK(pe.shrink_factor[0] == 1.0);
  // L1 defines no shrunk family of its own
  CHECK(pe.ci_shrunk[0].lo == pe.ci_basic[0].lo);
  CHECK(pe.ci_shrunk[1].hi == pe.ci_basic[1].hi);

  const auto e = make_est({0.3, -0.7}, {1, 1}, 50);
  const auto id = l1_shrink(e, 0.0);
  CHECK(id.psi_tilde == e.psi);

  const auto sp = l1_shrink(make_est({0.1, 0.2, 5.0}, {1, 1, 1}, 50), 0.3);
  int zeros = 0;
  for (int d = 0; d < 3; ++d) zeros += sp.psi_tilde[d] == 0.0 ? 1 : 0;
  CHECK(zeros == 2);
}

namespace {
// Posterior mean under prior N(0, prior_var) and likelihood N(theta,
// obs_var), by naive quadrature; independent of the closed form.
double posterior_mean_quadrature(double x, double prior_var, double obs_var) {
  const double lo = -12.0 * std::sqrt(prior_var + obs_var);
  const double hi = 12.0 * std::sqrt(prior_var + obs_var);
  const int grid = 40000;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= grid; ++i) {
    const double theta = lo + (hi - lo) * i / static_cast<double>(grid);
    const double w = normal_pdf(x, theta, obs_var) * normal_pdf(theta, 0.0, prior_var);
    num += theta * w;
    den += w;
  }
  return num / den;
}
}  // namespace

TEST_CASE("eb_shrink: factors, edge cases, posterior-mean oracle") {
  const auto e = make_est({1, 1, 1, 1}, {1, 4, 1, 4}, 100);
  const auto pe = eb_shrink(e);
  const double m = 4.0 / 3.0;
  CHECK(pe.shrink_factor[0] == doctest::Approx(m / (m + 0.01)));
  CHECK(pe.shrink_factor[1] == doctest::Approx(m / (m + 0.04)));
  CHECK(pe.psi_tilde[0] == doctest::Approx(m / (m + 0.01)));

  for (int d = 0; d < 4; ++d) {
    const double oracle =
        posterior_mean_quadrature(e.psi[d], m, e.eif_var[d] / static_cast<double>(e.n));
    CHECK(pe.psi_tilde[d] == doctest::Approx(oracle).epsilon(1e-6));
  }

  // zero-noise coordinate is left alone
  const auto e2 = make_est({2, 1}, {0, 4}, 100);
  CHECK(eb_shrink(e2).shrink_factor[0] == doctest::Approx(1.0));
  // enormous noise shrinks to (nearly) zero
  const auto e3 = make_est({2, 1}, {0, 1e12}, 10);
  CHECK(eb_shrink(e3).shrink_factor[1] < 1e-9);

  CHECK_THROWS_AS(eb_shrink(make_est({1}, {1}, 10)), std::invalid_argument);

  const auto zero = eb_shrink(make_est({0, 0}, {1, 1}, 10));
  CHECK(zero.shrink_factor[0] == 0.0);
  CHECK(zero.shrink_factor[1] == 0.0);
}

TEST_CASE("eb_shrink ordering: noisier coordinates shrink harder") {
  Rng rng(5u);
  for (int t = 0; t < 20; ++t) {
    EstimateSet e;
    e.n = 50 + static_cast<long>(rng.below(1000));
    e.psi = Eigen::VectorXd::Constant(4, rng.uniform(0.5, 2.0));
    e.eif_var = Eigen::VectorXd(4);
    for (int d = 0; d < 4; ++d) e.eif_var[d] = rng.uniform(0.1, 5.0);
    const auto pe = eb_shrink(e);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (e.eif_var[i] > e.eif_var[j]) CHECK(pe.shrink_factor[i] < pe.shrink_factor[j]);
      }
    }
  }
}

TEST_CASE("penalize dispatch") {
  const auto e = make_est({1, 1}, {1, 1}, 100);
  const auto none = penalize(e, PenaltyMethod::None);
  CHECK(none.psi_tilde == e.psi);
  CHECK(none.lambda == 0.0);
  CHECK(none.method == PenaltyMethod::None);

  const auto l2 = penalize(e, PenaltyMethod::L2);
  CHECK(l2.lambda == doctest::Approx(0.01));
  CHECK(l2.psi_tilde[0] == doctest::Approx(1.0 / 1.01));

  const auto e1 = make_est({0, 0, 0, 2}, {1, 1, 1, 1}, 25);
  const auto l1 = penalize(e1, PenaltyMethod::L1);
  double oracle_min = l1_crit(0.0, e1);
  for (double x = 1e-4; x <= 3.2; x += 1e-4) oracle_min = std::min(oracle_min, l1_crit(x, e1));
  CHECK(l1_crit(l1.lambda, e1) <= oracle_min + 1e-6 * (l1_crit(0.0, e1) + 1e-12));
  int zeros = 0;
  for (int d = 0; d < 4; ++d) zeros += l1.psi_tilde[d] == 0.0 ? 1 : 0;
  CHECK(zeros == 3);

  CHECK_THROWS_AS(penalize(e, PenaltyMethod::L2, 1.5), std::invalid_argument);
}

namespace {

PenaltyObjective l2_objective(double lambda) {
  PenaltyObjective obj;
  obj.grad = [lambda](const Eigen::VectorXd& x, const Eigen::VectorXd& xt) {
    return Eigen::VectorXd(-2.0 * (x - xt) + 2.0 * lambda * xt);
  };
  obj.hess = [lambda](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(2.0 * (1.0 + lambda) *
                           Eigen::MatrixXd::Identity(x.size(), x.size()));
  };
  obj.cross = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(-2.0 * Eigen::MatrixXd::Identity(x.size(), x.size()));
  };
  return obj;
}

PenaltyObjective weighted_objective(const Eigen::VectorXd& w, double lambda) {
  PenaltyObjective obj;
  obj.grad = [w, lambda](const Eigen::VectorXd& x, const Eigen::VectorXd& xt) {
    return Eigen::VectorXd(-2.0 * w.cwiseProduct(x - xt) + 2.0 * lambda * xt);
  };
  obj.hess = [w, lambda](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    Eigen::MatrixXd h = (2.0 * w).asDiagonal();
    h.diagonal().array() += 2.0 * lambda;
    return h;
  };
  obj.cross = [w](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd((-2.0 * w).asDiagonal());
  };
  return obj;
}

// Newton argmin of the objective through its callbacks only.
Eigen::VectorXd solve_penalized(const PenaltyObjective& obj, const Eigen::VectorXd& x) {
  Eigen::VectorXd xt = x;
  for (int it = 0; it < 100; ++it) {
    const Eigen::VectorXd g = obj.grad(x, xt);
    if (g.lpNorm<Eigen::Infinity>() < 1e-13) break;
    xt -= obj.hess(x, xt).ldlt().solve(g);
  }
  return xt;
}

}  // namespace

TEST_CASE("general_penalized_eif reproduces the scaled EIF under L2") {
  Rng rng(11u);
  for (int t = 0; t < 20; ++t) {
    const int n = 17, d_count = 4;
    Eigen::MatrixXd eif(n, d_count);
    Eigen::VectorXd psi(d_count);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < d_count; ++d) eif(i, d) = rng.normal();
    }
    for (int d = 0; d < d_count; ++d) psi[d] = rng.uniform(-2.0, 2.0);
    const double lambda = rng.uniform(0.0, 3.0);
    const Eigen::VectorXd psi_tilde = psi / (1.0 + lambda);

    const Eigen::MatrixXd out = general_penalized_eif(eif, psi, psi_tilde, l2_objective(lambda));
    CHECK((out - eif / (1.0 + lambda)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("general_penalized_eif: identity at lambda = 0") {
  Rng rng(12u);
  Eigen::MatrixXd eif(9, 3);
  Eigen::VectorXd psi(3);
  for (int i = 0; i < 9; ++i) {
    for (int d = 0; d < 3; ++d) eif(i, d) = rng.normal();
  }
  for (int d = 0; d < 3; ++d) psi[d] = rng.uniform(-1.0, 1.0);
  const Eigen::MatrixXd out = general_penalized_eif(eif, psi, psi, l2_objective(0.0));
  CHECK((out - eif).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("general_penalized_eif: weighted quadratic loss") {
  Rng rng(13u);
  const int n = 11, d_count = 3;
  Eigen::VectorXd w(d_count), psi(d_count);
  w << 0.5, 2.0, 1.25;
  psi << 1.0, -0.7, 0.4;
  const double lambda = 0.6;
  const auto obj = weighted_objective(w, lambda);

  Eigen::MatrixXd eif(n, d_count);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < d_count; ++d) eif(i, d) = rng.normal();
  }

  const Eigen::VectorXd psi_tilde = solve_penalized(obj, psi);
  for (int d = 0; d < d_count; ++d) {
    CHECK(psi_tilde[d] == doctest::Approx(w[d] * psi[d] / (w[d] + lambda)).epsilon(1e-10));
  }

  const Eigen::MatrixXd out = general_penalized_eif(eif, psi, psi_tilde, obj);
  for (int d = 0; d < d_count; ++d) {
    const double factor = w[d] / (w[d] + lambda);
    for (int i = 0; i < n; ++i) {
      CHECK(out(i, d) == doctest::Approx(factor * eif(i, d)).epsilon(1e-10));
    }
  }

  // Finite-difference Jacobian of the solution path as an independent
  // route to the same scaling.
  const double h = 1e-6;
  for (int d = 0; d < d_count; ++d) {
    Eigen::VectorXd up = psi, dn = psi;
    up[d] += h;
    dn[d] -= h;
    const double deriv = (solve_penalized(obj, up)[d] - solve_penalized(obj, dn)[d]) / (2.0 * h);
    CHECK(deriv == doctest::Approx(w[d] / (w[d] + lambda)).epsilon(1e-6));
  }
}

TEST_CASE("general_penalized_eif: singular normalizer") {
  PenaltyObjective obj;
  obj.grad = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(Eigen::VectorXd::Zero(x.size()));
  };
  obj.hess = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Zero(x.size(), x.size()));
  };
  obj.cross = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(x.size(), x.size()));
  };
  Eigen::MatrixXd eif = Eigen::MatrixXd::Ones(4, 2);
  Eigen::VectorXd psi = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(general_penalized_eif(eif, psi, psi, obj), singular_normalizer_error);
}

TEST_CASE("gamma_eif: zeros, centering, and the D=1 delta method") {
  const auto e = make_est({1.0, -0.5}, {0.7, 0.3}, 40);
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(6, 2);
  const Eigen::VectorXd out = gamma_eif(zeros, zeros, e);
  CHECK(out.cwiseAbs().maxCoeff() == 0.0);

  // centered inputs give a (numerically) mean-zero output
  Rng rng(21u);
  Eigen::MatrixXd eif_psi(500, 2), eif_s2(500, 2);
  for (int i = 0; i < 500; ++i) {
    for (int d = 0; d < 2; ++d) {
      eif_psi(i, d) = rng.normal();
      eif_s2(i, d) = rng.normal();
    }
  }
  eif_psi.rowwise() -= eif_psi.colwise().mean().eval();
  eif_s2.rowwise() -= eif_s2.colwise().mean().eval();
  const Eigen::VectorXd centered = gamma_eif(eif_psi, eif_s2, e);
  CHECK(std::abs(centered.mean()) < 1e-12 * centered.cwiseAbs().maxCoeff());

  // D = 1: matches -2 sigma^2/psi^3 * D_psi + D_sigma2 / psi^2
  const auto e1 = make_est({0.8}, {0.9}, 30);
  Eigen::MatrixXd ep(50, 1), es(50, 1);
  for (int i = 0; i < 50; ++i) {
    ep(i, 0) = rng.normal();
    es(i, 0) = rng.normal();
  }
  const Eigen::VectorXd got = gamma_eif(ep, es, e1);
  const double psi = 0.8, s2 = 0.9;
  for (int i = 0; i < 50; ++i) {
    const double expected = -2.0 * s2 / (psi * psi * psi) * ep(i, 0) + es(i, 0) / (psi * psi);
    CHECK(got[i] == doctest::Approx(expected).epsilon(1e-12));
  }

  CHECK_THROWS_AS(gamma_eif(zeros, zeros, make_est({0, 0}, {1, 1}, 10)),
                  degenerate_parameter_error);
}

TEST_CASE("lambda_star_eif: limiting forms") {
  Rng rng(31u);
  const auto e = make_est({1.0, -2.0, 0.5}, {1.0, 2.0, 0.5}, 100);
  Eigen::MatrixXd eif(40, 3);
  for (int i = 0; i < 40; ++i) {
    for (int d = 0; d < 3; ++d) eif(i, d) = rng.normal();
  }

  const Eigen::VectorXd zero_gamma = Eigen::VectorXd::Zero(40);
  const double lam = 0.07;
  const Eigen::MatrixXd out = lambda_star_eif(eif, zero_gamma, e, lam);
  CHECK((out - eif / (1.0 + lam)).cwiseAbs().maxCoeff() < 1e-14);

  // with n enormous and lambda* ~ gamma/n tiny, the EIF approaches eif_psi
  auto big = e;
  big.n = 1'000'000'000'000L;
  Eigen::VectorXd gam(40);
  for (int i = 0; i < 40; ++i) gam[i] = rng.normal();
  const Eigen::MatrixXd lim = lambda_star_eif(eif, gam, big, 1e-12);
  CHECK((lim - eif).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("lambda_star_eif pathwise-derivative oracle on a 3-point law") {
  // Mean parameter on a discrete 3-point space, D = 1 with psi > 0: all
  // EIFs are exact, so the formula must match the numeric path
  // derivative of the penalized parameter along a mixture fluctuation.
  const Eigen::Vector3d p0(0.2, 0.5, 0.3);
  const Eigen::Vector3d f(1.4, 0.6, 2.2);
  const long n = 50;

  const auto compute = [&](const Eigen::Vector3d& p) {
    const double psi = p.dot(f);
    const double second = p.dot(f.cwiseAbs2());
    const double sigma2 = second - psi * psi;
    const double gamma_val = sigma2 / (psi * psi);
    const double lam = gamma_val / static_cast<double>(n);
    return std::pair<double, double>{psi / (1.0 + lam), psi};
  };

  // Bounded score with sum_i p_i s_i = 0.
  const Eigen::Vector3d s(1.0, -0.2, -(0.2 * 1.0 - 0.5 * 0.2) / 0.3);
  Eigen::Vector3d score = s;
  score[2] = -(p0[0] * s[0] + p0[1] * s[1]) / p0[2];

  const double h = 1e-5;
  Eigen::Vector3d p_up = p0.cwiseProduct(Eigen::Vector3d::Ones() + h * score);
  Eigen::Vector3d p_dn = p0.cwiseProduct(Eigen::Vector3d::Ones() - h * score);
  const double numeric = (compute(p_up).first - compute(p_dn).first) / (2.0 * h);

  // Analytic route via the implemented EIFs evaluated at the atoms.
  const double psi = p0.dot(f);
  const double sigma2 = p0.dot(f.cwiseAbs2()) - psi * psi;
  EstimateSet est;
  est.psi = Eigen::VectorXd::Constant(1, psi);
  est.eif_var = Eigen::VectorXd::Constant(1, sigma2);
  est.n = n;

  Eigen::MatrixXd eif_psi(3, 1);
  for (int i = 0; i < 3; ++i) eif_psi(i, 0) = f[i] - psi;
  const Eigen::VectorXd eif_gamma = gamma_eif(eif_psi, Eigen::MatrixXd(), est);
  const double lam = sigma2 / (psi * psi) / static_cast<double>(n);
  const Eigen::MatrixXd eif_tilde = lambda_star_eif(eif_psi, eif_gamma, est, lam);

  double analytic = 0.0;
  for (int i = 0; i < 3; ++i) analytic += p0[i] * score[i] * eif_tilde(i, 0);
  CHECK(analytic == doctest::Approx(numeric).epsilon(1e-6));
}

TEST_CASE("shrinkage monotonicity in lambda") {
  Rng rng(41u);
  for (int t = 0; t < 50; ++t) {
    EstimateSet e;
    const int d_count = 1 + static_cast<int>(rng.below(6));
    e.psi = Eigen::VectorXd(d_count);
    e.eif_var = Eigen::VectorXd(d_count);
    for (int d = 0; d < d_count; ++d) {
      e.psi[d] = rng.uniform(-3.0, 3.0);
      e.eif_var[d] = rng.uniform(0.0, 2.0);
    }
    e.n = 100;
    const double l1v = rng.uniform(0.0, 2.0);
    const double l2v = l1v + rng.uniform(0.01, 2.0);
    const auto a2 = l2_shrink(e, l1v), b2 = l2_shrink(e, l2v);
    const auto a1 = l1_shrink(e, l1v), b1 = l1_shrink(e, l2v);
    for (int d = 0; d < d_count; ++d) {
      CHECK(std::abs(b2.psi_tilde[d]) <= std::abs(a2.psi_tilde[d]) + 1e-15);
      CHECK(std::abs(b1.psi_tilde[d]) <= std::abs(a1.psi_tilde[d]) + 1e-15);
      // a coordinate zeroed at the smaller lambda stays zero
      if (a1.psi_tilde[d] == 0.0) CHECK(b1.psi_tilde[d] == 0.0);
    }
  }
}

TEST_CASE("asymptotic transparency: lambda* -> 0 and psi_tilde -> psi") {
  // A sparse population: the zero coordinate keeps the L1 tuning
  // strictly positive at every n (it decays like that coordinate's SE),
  // so the decrease across n is strict for both penalties.
  const Eigen::VectorXd psi0 = (Eigen::VectorXd(3) << 0.8, 0.0, 1.6).finished();
  const Eigen::VectorXd var0 = (Eigen::VectorXd(3) << 2.0, 1.0, 3.0).finished();

  double prev_l2 = 1e300, prev_l1 = 1e300;
  for (long n : {100L, 10'000L, 1'000'000L}) {
    EstimateSet e;
    e.psi = psi0;
    e.eif_var = var0;
    e.n = n;
    const double lam2 = l2_lambda_star(e);
    const double lam1 = l1_lambda_star(e);
    CHECK(lam2 < prev_l2);
    CHECK(lam1 < prev_l1);
    prev_l2 = lam2;
    prev_l1 = lam1;

    const auto pe = l2_shrink(e, lam2);
    const double bound = psi0.cwiseAbs().maxCoeff() * gamma(e) / static_cast<double>(n) * 1.01;
    CHECK((pe.psi_tilde - psi0).cwiseAbs().maxCoeff() < bound);
  }
}

TEST_CASE("confidence families contain their centers and nest") {
  Rng rng(51u);
  for (int t = 0; t < 30; ++t) {
    EstimateSet e;
    e.psi = Eigen::VectorXd(3);
    e.eif_var = Eigen::VectorXd(3);
    for (int d = 0; d < 3; ++d) {
      e.psi[d] = rng.uniform(-2.0, 2.0);
      e.eif_var[d] = rng.uniform(0.0, 3.0);
    }
    if (e.psi.cwiseAbs().maxCoeff() == 0.0) e.psi[0] = 0.5;
    e.n = 200;
    for (auto method : {PenaltyMethod::None, PenaltyMethod::L1, PenaltyMethod::L2,
                        PenaltyMethod::EB}) {
      const auto pe = penalize(e, method, 0.05);
      for (int d = 0; d < 3; ++d) {
        CHECK(pe.ci_basic[static_cast<std::size_t>(d)].contains(pe.psi_tilde[d]));
        CHECK(pe.ci_shrunk[static_cast<std::size_t>(d)].contains(pe.psi_tilde[d]));
        CHECK(pe.ci_shrunk[static_cast<std::size_t>(d)].lo >=
              pe.ci_basic[static_cast<std::size_t>(d)].lo - 1e-12);
        CHECK(pe.ci_shrunk[static_cast<std::size_t>(d)].hi <=
              pe.ci_basic[static_cast<std::size_t>(d)].hi + 1e-12);
      }
    }
  }
}

TEST_CASE("normal quantile accuracy") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
  CHECK(two_sided_critical_value(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  // round-trip through the CDF across the support
  for (double p : {1e-9, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0 - 1e-6}) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
  CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}

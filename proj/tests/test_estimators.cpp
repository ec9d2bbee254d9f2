#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/estimators.hpp"
#include "shrinkfit/rng.hpp"
#include "shrinkfit/simulate.hpp"

using namespace shrinkfit;

namespace {

Dataset make_dataset(const std::vector<std::string>& names,
                     const std::vector<Eigen::VectorXd>& cols, DatasetRoles roles) {
  Dataset d(names, cols);
  d.set_roles(std::move(roles));
  return d;
}

double inv_logit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void check_onestep_identity(const OneStepResult& res) {
  const auto& diag = res.diag;
  for (Eigen::Index k = 0; k < diag.fold_estimate.rows(); ++k) {
    for (Eigen::Index d = 0; d < diag.fold_estimate.cols(); ++d) {
      CHECK(std::abs(diag.fold_estimate(k, d) -
                     (diag.fold_plugin(k, d) + diag.fold_correction(k, d))) < 1e-10);
    }
  }
  for (Eigen::Index d = 0; d < diag.fold_estimate.cols(); ++d) {
    CHECK(std::abs(diag.fold_weight.col(d).sum() - 1.0) < 1e-12);
    CHECK(std::abs(res.est.psi[d] - diag.fold_weight.col(d).dot(diag.fold_estimate.col(d))) <
          1e-10);
  }
}

void check_eif_mean_zero(const EifMatrix& eif) {
  REQUIRE(eif.centered);
  const double n = static_cast<double>(eif.values.rows());
  for (Eigen::Index d = 0; d < eif.values.cols(); ++d) {
    const double mean = eif.values.col(d).mean();
    const double sd = std::sqrt(eif.values.col(d).squaredNorm() / n);
    if (sd > 0.0) CHECK(std::abs(mean) < 1e-8 * sd);
  }
}

}  // namespace

TEST_CASE("make_folds: balance, determinism, stratification") {
  const FoldAssignment f = make_folds(10, 2, 7u);
  const auto sizes = f.fold_sizes();
  CHECK(sizes[0] == 5);
  CHECK(sizes[1] == 5);

  const FoldAssignment g = make_folds(10, 2, 7u);
  CHECK(f.fold_of == g.fold_of);
  const FoldAssignment h = make_folds(10, 2, 8u);
  CHECK(f.fold_of != h.fold_of);  // overwhelmingly likely for seeded shuffles

  // strata of sizes 7 and 9 split as (4,3) and (5,4) in some order
  std::vector<int> strata(16);
  for (int i = 0; i < 16; ++i) strata[static_cast<std::size_t>(i)] = i < 7 ? 0 : 1;
  const FoldAssignment s = make_folds(16, 2, 3u, &strata);
  int s0f0 = 0, s0f1 = 0, s1f0 = 0, s1f1 = 0;
  for (int i = 0; i < 16; ++i) {
    if (strata[static_cast<std::size_t>(i)] == 0) {
      (s.fold_of[static_cast<std::size_t>(i)] == 0 ? s0f0 : s0f1)++;
    } else {
      (s.fold_of[static_cast<std::size_t>(i)] == 0 ? s1f0 : s1f1)++;
    }
  }
  CHECK(std::abs(s0f0 - s0f1) == 1);
  CHECK(std::abs(s1f0 - s1f1) == 1);
  CHECK(s0f0 + s0f1 == 7);
  CHECK(s1f0 + s1f1 == 9);

  std::vector<int> tiny = {0, 0, 0, 1};
  CHECK_THROWS_AS(make_folds(4, 2, 1u, &tiny), fold_stratification_error);
  CHECK_THROWS_AS(make_folds(3, 5, 1u), fold_stratification_error);
  CHECK_THROWS_AS(make_folds(10, 1, 1u), std::invalid_argument);
}

TEST_CASE("eif_variance: values and two-pass oracle") {
  EifMatrix eif;
  eif.values = Eigen::MatrixXd::Zero(4, 2);
  eif.values.col(1) << -1, 1, -1, 1;
  eif.centered = true;
  const Eigen::VectorXd v = eif_variance(eif);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == doctest::Approx(1.0));

  Rng rng(3u);
  EifMatrix r;
  r.values.resize(1000, 1);
  for (int i = 0; i < 1000; ++i) r.values(i, 0) = rng.uniform(-5.0, 5.0);
  r.center();
  const double got = eif_variance(r)[0];
  // independent two-pass oracle
  double mean = 0.0;
  for (int i = 0; i < 1000; ++i) mean += r.values(i, 0);
  mean /= 1000.0;
  double acc = 0.0;
  for (int i = 0; i < 1000; ++i) acc += (r.values(i, 0) - mean) * (r.values(i, 0) - mean);
  CHECK(got == doctest::Approx(acc / 1000.0).epsilon(1e-12));

  EifMatrix uncentered;
  uncentered.values = Eigen::MatrixXd::Ones(5, 1);
  CHECK_THROWS_AS(eif_variance(uncentered), std::invalid_argument);
  EifMatrix short_one;
  short_one.values = Eigen::MatrixXd::Zero(1, 1);
  short_one.centered = true;
  CHECK_THROWS_AS(eif_variance(short_one), insufficient_data_error);
}

TEST_CASE("onestep_linear_assoc: independence gives nulls within 4 SE") {
  Rng rng(101u);
  const long n = 10000;
  const int p = 3;
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  DatasetRoles roles;
  for (int j = 0; j < p; ++j) {
    Eigen::VectorXd x(n);
    for (long i = 0; i < n; ++i) x[i] = rng.normal();
    names.push_back("x" + std::to_string(j + 1));
    cols.push_back(x);
    roles.covariates.push_back(names.back());
  }
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) y[i] = rng.normal();
  names.push_back("y");
  cols.push_back(y);
  roles.outcome = "y";

  LearnerConfig ols;
  const auto res = onestep_linear_assoc(make_dataset(names, cols, roles), 5, ols, 11u, false);
  for (int d = 0; d < p; ++d) {
    CHECK(std::abs(res.est.psi[d]) < 4.0 * res.est.se(d));
  }
  check_onestep_identity(res);
  check_eif_mean_zero(res.eif);
}

TEST_CASE("onestep_linear_assoc: exact linear DGP, scaled and unscaled") {
  Rng rng(102u);
  const long n = 10000;
  Eigen::VectorXd x1(n), x2(n), y(n);
  for (long i = 0; i < n; ++i) {
    x1[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x2[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    y[i] = x1[i] + rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.covariates = {"x1", "x2"};
  const Dataset data = make_dataset({"x1", "x2", "y"}, {x1, x2, y}, roles);

  LearnerConfig ols;
  const auto scaled = onestep_linear_assoc(data, 5, ols, 7u, true);
  CHECK(std::abs(scaled.est.psi[0] - 1.0) < 4.0 * scaled.est.se(0));
  CHECK(std::abs(scaled.est.psi[1] - 0.0) < 4.0 * scaled.est.se(1));

  // unscaled target is Var(X1 | X2) * beta = 0.25
  const auto raw = onestep_linear_assoc(data, 5, ols, 7u, false);
  CHECK(std::abs(raw.est.psi[0] - 0.25) < 4.0 * raw.est.se(0));
  check_onestep_identity(raw);
}

TEST_CASE("onestep_linear_assoc: determinism and degenerate scaling") {
  Rng rng(103u);
  const long n = 400;
  Eigen::VectorXd x1(n), x2(n), y(n);
  for (long i = 0; i < n; ++i) {
    x1[i] = rng.normal();
    x2[i] = 1.0;  // constant column
    y[i] = 0.5 * x1[i] + rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.covariates = {"x1", "x2"};
  const Dataset data = make_dataset({"x1", "x2", "y"}, {x1, x2, y}, roles);

  LearnerConfig ols;
  CHECK_THROWS_AS(onestep_linear_assoc(data, 4, ols, 5u, true), degenerate_scaling_error);

  roles.covariates = {"x1"};
  Dataset clean = make_dataset({"x1", "x2", "y"}, {x1, x2, y}, roles);
  const auto a = onestep_linear_assoc(clean, 4, ols, 5u, true);
  const auto b = onestep_linear_assoc(clean, 4, ols, 5u, true);
  CHECK(a.est.psi == b.est.psi);
  CHECK(a.est.eif_var == b.est.eif_var);
  const auto c = onestep_linear_assoc(clean, 4, ols, 6u, true);
  CHECK(a.est.psi != c.est.psi);  // folds moved
}

namespace {

std::pair<Dataset, Eigen::VectorXd> sim2_draw(long n, int groups, double theta, double sigma,
                                              std::uint64_t seed, std::uint64_t rep = 1) {
  Sim2Config cfg;
  cfg.n = n;
  cfg.n_groups = groups;
  cfg.theta = theta;
  cfg.noise_sd = sigma;
  cfg.reps = 1;
  cfg.seed = seed;
  return dgp_sim2(cfg, rep);
}

}  // namespace

TEST_CASE("onestep_group_ate: null effects stay within 4 SE of zero") {
  auto [data, truth] = sim2_draw(2000, 8, 0.0, 1.0, 42u);
  REQUIRE(truth.cwiseAbs().maxCoeff() == 0.0);
  const auto res = onestep_group_ate(data, 5, sim2_default_learners(), 9u);
  for (int d = 0; d < 8; ++d) {
    CHECK(std::abs(res.est.psi[d]) < 4.0 * res.est.se(d));
  }
  check_onestep_identity(res);
  check_eif_mean_zero(res.eif);
}

TEST_CASE("onestep_group_ate recovers the drawn effects at N = 10^4") {
  auto [data, truth] = sim2_draw(10000, 5, 0.5, 1.0, 77u);
  const auto res = onestep_group_ate(data, 5, sim2_default_learners(), 13u);
  for (int d = 0; d < 5; ++d) {
    CHECK(std::abs(res.est.psi[d] - truth[d]) < 4.0 * res.est.se(d));
  }
}

TEST_CASE("onestep_group_ate: positivity and stratification errors name the cell") {
  const long n = 60;
  Eigen::VectorXd g(n), a(n), x(n), y(n);
  Rng rng(5u);
  for (long i = 0; i < n; ++i) {
    g[i] = i < 30 ? 1.0 : 2.0;
    a[i] = i < 30 ? (i % 2 == 0 ? 1.0 : 0.0) : 1.0;  // group 2 all treated
    x[i] = rng.uniform();
    y[i] = rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.treatment = "a";
  roles.group = "g";
  roles.covariates = {"x"};
  const Dataset data = make_dataset({"g", "a", "x", "y"}, {g, a, x, y}, roles);
  LearnerConfig ols;
  try {
    onestep_group_ate(data, 5, ols, 1u);
    FAIL("expected positivity_error");
  } catch (const positivity_error& e) {
    CHECK(std::string(e.what()).find("group 2") != std::string::npos);
  }

  // give group 2 a couple of controls: the cell is now non-empty but
  // smaller than K, which is a stratification problem instead
  a[30] = 0.0;
  a[31] = 0.0;
  const Dataset data2 = make_dataset({"g", "a", "x", "y"}, {g, a, x, y}, roles);
  CHECK_THROWS_AS(onestep_group_ate(data2, 5, ols, 1u), fold_stratification_error);
}

TEST_CASE("onestep_group_ate: double robustness to one bad nuisance") {
  const long n = 10000;
  const int groups = 4;
  auto [data, truth] = sim2_draw(n, groups, 1.0, 1.0, 1234u);

  // At theta = 1 every group is active, so the DGP's propensity slopes
  // equal the drawn effects.
  const Eigen::VectorXd alpha = truth;

  GroupAteNuisances true_prop_bad_outcome;
  true_prop_bad_outcome.make_outcome = [](int, const Eigen::MatrixXd&, const Eigen::VectorXd& a,
                                          const Eigen::VectorXd& y) {
    // Arm means only: ignores every covariate, biased on its own; the
    // propensity term has to do the repair.
    double m1 = 0.0, m0 = 0.0, c1 = 0.0, c0 = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (a[i] == 1.0) {
        m1 += y[i];
        c1 += 1.0;
      } else {
        m0 += y[i];
        c0 += 1.0;
      }
    }
    m1 /= c1;
    m0 /= c0;
    return GroupAteNuisances::OutcomeModel(
        [m1, m0](double arm, const Eigen::RowVectorXd&) { return arm == 1.0 ? m1 : m0; });
  };
  true_prop_bad_outcome.make_propensity = [&alpha](int group, const Eigen::MatrixXd&,
                                                   const Eigen::VectorXd&) {
    const double slope = alpha[group - 1];
    return GroupAteNuisances::PropensityModel([slope](const Eigen::RowVectorXd& x) {
      return inv_logit(x[0] + slope - slope * x[1]);
    });
  };

  const auto res_a = onestep_group_ate_custom(data, 5, 3u, true_prop_bad_outcome);
  for (int d = 0; d < groups; ++d) {
    CHECK(std::abs(res_a.est.psi[d] - truth[d]) < 4.0 * res_a.est.se(d));
  }

  GroupAteNuisances true_outcome_bad_prop;
  true_outcome_bad_prop.make_outcome = [&truth](int group, const Eigen::MatrixXd&,
                                                const Eigen::VectorXd&, const Eigen::VectorXd&) {
    const double effect = truth[group - 1];
    return GroupAteNuisances::OutcomeModel([effect](double arm, const Eigen::RowVectorXd& x) {
      return 2.0 * x[0] - 2.0 * x[1] + 0.5 * x[4] * x[4] + effect * arm;
    });
  };
  true_outcome_bad_prop.make_propensity = [](int, const Eigen::MatrixXd&,
                                             const Eigen::VectorXd&) {
    return GroupAteNuisances::PropensityModel([](const Eigen::RowVectorXd&) { return 0.5; });
  };

  const auto res_b = onestep_group_ate_custom(data, 5, 3u, true_outcome_bad_prop);
  for (int d = 0; d < groups; ++d) {
    CHECK(std::abs(res_b.est.psi[d] - truth[d]) < 4.0 * res_b.est.se(d));
  }
}

TEST_CASE("onestep_indirect_std: single provider collapses to the sample mean") {
  Rng rng(201u);
  const long n = 500;
  Eigen::VectorXd a = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) {
    x[i] = rng.uniform();
    y[i] = 1.0 + x[i] + rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.treatment = "a";
  roles.covariates = {"x"};
  const Dataset data = make_dataset({"a", "x", "y"}, {a, x, y}, roles);
  const auto res = onestep_indirect_std(data, 5, LearnerConfig{}, 4u);
  CHECK(res.est.psi[0] == doctest::Approx(y.mean()).epsilon(1e-10));
  CHECK(std::abs(res.est.psi[0] - y.mean()) < 4.0 * res.est.se(0) + 1e-12);
  check_onestep_identity(res);
}

TEST_CASE("onestep_indirect_std: randomized assignment gives E[Y] everywhere") {
  Rng rng(202u);
  const long n = 6000;
  const int providers = 3;
  Eigen::VectorXd a(n), x1(n), x2(n), y(n);
  for (long i = 0; i < n; ++i) {
    a[i] = 1.0 + static_cast<double>(rng.below(providers));
    x1[i] = rng.uniform();
    x2[i] = rng.uniform();
    y[i] = x1[i] + 2.0 * x2[i] + rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.treatment = "a";
  roles.covariates = {"x1", "x2"};
  const Dataset data = make_dataset({"a", "x1", "x2", "y"}, {a, x1, x2, y}, roles);
  const auto res = onestep_indirect_std(data, 5, LearnerConfig{}, 8u);
  for (int d = 0; d < providers; ++d) {
    CHECK(std::abs(res.est.psi[d] - 1.5) < 4.0 * res.est.se(d));
  }
  check_eif_mean_zero(res.eif);
}

TEST_CASE("onestep_indirect_std: confounded DGP vs Monte Carlo truth") {
  Rng rng(203u);
  const long n = 6000;
  Eigen::VectorXd a(n), x1(n), x2(n), y(n);
  for (long i = 0; i < n; ++i) {
    x1[i] = rng.uniform();
    x2[i] = rng.uniform();
    const double p2 = inv_logit(2.0 * x1[i] - 1.0);
    a[i] = rng.bernoulli(p2) ? 2.0 : 1.0;
    y[i] = 1.0 + x1[i] * x1[i] + x2[i] + rng.normal();
  }
  DatasetRoles roles;
  roles.outcome = "y";
  roles.treatment = "a";
  roles.covariates = {"x1", "x2"};
  const Dataset data = make_dataset({"a", "x1", "x2", "y"}, {a, x1, x2, y}, roles);

  LearnerConfig learners;
  learners.squared_terms = true;  // puts x1^2 in the outcome-model span
  const auto res = onestep_indirect_std(data, 5, learners, 31u);

  // 10^7-draw Monte Carlo integration of E[mu0(X) | A = d].
  Rng mc(555u);
  double num1 = 0.0, den1 = 0.0, num2 = 0.0, den2 = 0.0;
  for (long i = 0; i < 10'000'000; ++i) {
    const double u1 = mc.uniform();
    const double u2 = mc.uniform();
    const double mu = 1.0 + u1 * u1 + u2;
    const double p2 = inv_logit(2.0 * u1 - 1.0);
    num2 += mu * p2;
    den2 += p2;
    num1 += mu * (1.0 - p2);
    den1 += 1.0 - p2;
  }
  const double truth1 = num1 / den1;
  const double truth2 = num2 / den2;
  CHECK(std::abs(res.est.psi[0] - truth1) < 4.0 * res.est.se(0));
  CHECK(std::abs(res.est.psi[1] - truth2) < 4.0 * res.est.se(1));

  // empty provider level triggers positivity
  Eigen::VectorXd a3 = a;
  for (long i = 0; i < n; ++i) {
    if (a3[i] == 2.0) a3[i] = 3.0;  // level 2 now empty
  }
  const Dataset bad = make_dataset({"a", "x1", "x2", "y"}, {a3, x1, x2, y}, roles);
  CHECK_THROWS_AS(onestep_indirect_std(bad, 5, learners, 1u), positivity_error);
}

TEST_CASE("srr: ratios, delta-method variance, zero-mean error") {
  EstimateSet est;
  est.psi = (Eigen::VectorXd(3) << 0.25, 0.5, 0.3).finished();
  est.eif_var = (Eigen::VectorXd(3) << 1.0, 2.0, 4.0).finished();
  est.n = 100;

  Eigen::VectorXd obs(3);
  obs << 0.25, 0.25, 0.25;
  const EstimateSet out = srr(est, obs);
  CHECK(out.psi[0] == doctest::Approx(0.0));
  CHECK(out.psi[1] == doctest::Approx(1.0));
  CHECK(out.psi[2] == doctest::Approx(0.2));
  for (int d = 0; d < 3; ++d) {
    CHECK(out.eif_var[d] == doctest::Approx(est.eif_var[d] / (0.25 * 0.25)));
  }

  obs[1] = 0.0;
  try {
    srr(est, obs);
    FAIL("expected domain_error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("reported SEs track the replication spread (linear assoc)") {
  const int reps = 250;
  const long n = 4000;
  const int p = 3;
  Eigen::MatrixXd psis(reps, p);
  Eigen::MatrixXd ses(reps, p);
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::keyed(9000u, static_cast<std::uint64_t>(r));
    Eigen::VectorXd x1(n), x2(n), x3(n), y(n);
    for (long i = 0; i < n; ++i) {
      x1[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      x2[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      x3[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
      y[i] = x1[i] - 0.5 * x2[i] + rng.normal();
    }
    DatasetRoles roles;
    roles.outcome = "y";
    roles.covariates = {"x1", "x2", "x3"};
    const Dataset data = make_dataset({"x1", "x2", "x3", "y"}, {x1, x2, x3, y}, roles);
    const auto res =
        onestep_linear_assoc(data, 5, LearnerConfig{}, static_cast<std::uint64_t>(r), true);
    for (int d = 0; d < p; ++d) {
      psis(r, d) = res.est.psi[d];
      ses(r, d) = res.est.se(d);
    }
  }
  for (int d = 0; d < p; ++d) {
    const double mean = psis.col(d).mean();
    const double sd =
        std::sqrt((psis.col(d).array() - mean).square().sum() / static_cast<double>(reps - 1));
    const double mean_se = ses.col(d).mean();
    CHECK(std::abs(sd - mean_se) / sd < 0.15);
  }
}

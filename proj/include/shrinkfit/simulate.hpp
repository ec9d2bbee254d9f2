#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shrinkfit/dataset.hpp"
#include "shrinkfit/estimates.hpp"
#include "shrinkfit/learners.hpp"

namespace shrinkfit {

enum class Study { sim1, sim2 };

std::string to_string(Study s);
Study study_from_string(const std::string& name);

inline LearnerConfig sim1_default_learners() {
  LearnerConfig c;
  c.kind = LearnerKind::lasso;
  return c;
}

inline LearnerConfig sim2_default_learners() {
  LearnerConfig c;
  c.kind = LearnerKind::ols;
  c.squared_terms = true;
  return c;
}

// Sparse linear regression scenario: binary covariates, linear signal
// with Bernoulli(sparsity_theta) unit coefficients fixed per study seed.
struct Sim1Config {
  long n = 250;
  int n_covariates = 100;
  double sparsity_theta = 0.3;
  double noise_sd = 1.0;
  int reps = 250;
  std::uint64_t seed = 1;
  int K = 5;  // cross-fitting folds for the one-step estimator
  LearnerConfig learners = sim1_default_learners();

  void validate() const;
};

// Group-specific treatment effect scenario: uniform covariates and group
// assignment, logistic treatment with a group-level slope, additive
// group effect beta_d = delta_d * alpha_d fixed per study seed.
struct Sim2Config {
  long n = 4000;
  int n_groups = 25;
  double theta = 0.3;
  double noise_sd = 1.0;
  int reps = 250;
  std::uint64_t seed = 1;
  int K = 5;
  LearnerConfig learners = sim2_default_learners();
  double eps_trunc = 0.01;

  void validate() const;
};

// One replication's data plus the true parameter vector. The truth is a
// function of the study seed only; rep_index keys the observation draws.
std::pair<Dataset, Eigen::VectorXd> dgp_sim1(const Sim1Config& cfg, std::uint64_t rep_index);
std::pair<Dataset, Eigen::VectorXd> dgp_sim2(const Sim2Config& cfg, std::uint64_t rep_index);

struct MethodMetrics {
  double mse = 0.0;
  double me = 0.0;
  double var = 0.0;
  double coverage = 0.0;  // NaN when the method reports no intervals
  Eigen::VectorXd mse_by_coord;
  Eigen::VectorXd bias_by_coord;
  Eigen::VectorXd var_by_coord;
};

// Aggregates across replications (rows) and coordinates (columns).
// cis[r] may be empty when a method reports no intervals.
MethodMetrics metrics(const Eigen::MatrixXd& estimates,
                      const std::vector<std::vector<Interval>>& cis,
                      const Eigen::VectorXd& truth);

struct StudyConfig {
  Study study = Study::sim2;
  Sim1Config sim1;
  Sim2Config sim2;
  // Penalization methods, plus for sim1 the in-house regression
  // benchmarks "lasso_reg" and "ridge_reg".
  std::vector<std::string> methods = {"none", "l1", "l2", "eb"};
  int parallelism = 1;
  bool keep_raw = false;
  double alpha = 0.05;

  void validate() const;
};

struct SimulationReport {
  Study study = Study::sim2;
  std::vector<std::pair<std::string, std::string>> scenario;  // ordered config echo
  std::vector<std::pair<std::string, MethodMetrics>> per_method;
  int reps_completed = 0;
  int reps_skipped = 0;
  bool failed = false;  // more than 5% of replications skipped
  double wall_seconds = 0.0;

  struct RawRecord {
    int rep = 0;
    std::string method;
    double mse = 0.0;
    double me = 0.0;
    double coverage = 0.0;
  };
  std::vector<RawRecord> raw;
};

// Runs every replication (concurrently up to cfg.parallelism), applies
// each requested method, and aggregates. Deterministic for a fixed
// config and seed regardless of parallelism.
SimulationReport run_study(const StudyConfig& cfg);

}  // namespace shrinkfit

#include "shrinkfit/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "shrinkfit/errors.hpp"
#include "shrinkfit/estimators.hpp"
#include "shrinkfit/penalty.hpp"
#include "shrinkfit/rng.hpp"

namespace shrinkfit {

namespace {
// Stream tags for keyed RNG derivation.
constexpr std::uint64_t kStreamTruth = 0xbe7a0001ULL;
constexpr std::uint64_t kStreamData = 0xda7a0001ULL;
constexpr std::uint64_t kStreamFolds = 0xf01d0001ULL;
}  // namespace

std::string to_string(Study s) { return s == Study::sim1 ? "sim1" : "sim2"; }

Study study_from_string(const std::string& name) {
  if (name == "sim1") return Study::sim1;
  if (name == "sim2") return Study::sim2;
  throw std::invalid_argument("unknown study: " + name);
}

void Sim1Config::validate() const {
  if (n < 10) throw std::invalid_argument("sim1: n must be >= 10");
  if (n_covariates < 1) throw std::invalid_argument("sim1: n_covariates must be >= 1");
  if (!(sparsity_theta >= 0.0 && sparsity_theta <= 1.0)) {
    throw std::invalid_argument("sim1: sparsity_theta must be in [0,1]");
  }
  if (!(noise_sd > 0.0)) throw std::invalid_argument("sim1: noise_sd must be > 0");
  if (reps < 1) throw std::invalid_argument("sim1: reps must be >= 1");
  if (K < 2) throw std::invalid_argument("sim1: K must be >= 2");
}

void Sim2Config::validate() const {
  if (n_groups < 1) throw std::invalid_argument("sim2: n_groups must be >= 1");
  if (n < 20L * n_groups) {
    throw std::invalid_argument("sim2: n must be >= 20 * n_groups to keep cells populated");
  }
  if (!(theta >= 0.0 && theta <= 1.0)) throw std::invalid_argument("sim2: theta must be in [0,1]");
  if (!(noise_sd > 0.0)) throw std::invalid_argument("sim2: noise_sd must be > 0");
  if (reps < 1) throw std::invalid_argument("sim2: reps must be >= 1");
  if (K < 2) throw std::invalid_argument("sim2: K must be >= 2");
  if (!(eps_trunc > 0.0 && eps_trunc < 0.5)) {
    throw std::invalid_argument("sim2: eps_trunc must be in (0, 0.5)");
  }
}

std::pair<Dataset, Eigen::VectorXd> dgp_sim1(const Sim1Config& cfg, std::uint64_t rep_index) {
  cfg.validate();
  const int p = cfg.n_covariates;

  // Coefficients are fixed at the start of the study: same for every rep.
  Rng truth_rng = Rng::keyed(cfg.seed, kStreamTruth);
  Eigen::VectorXd beta(p);
  for (int j = 0; j < p; ++j) beta[j] = truth_rng.bernoulli(cfg.sparsity_theta) ? 1.0 : 0.0;

  Rng rng = Rng::keyed(cfg.seed, kStreamData, rep_index);
  Eigen::MatrixXd X(cfg.n, p);
  for (long i = 0; i < cfg.n; ++i) {
    for (int j = 0; j < p; ++j) X(i, j) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  }
  Eigen::VectorXd y = X * beta;
  for (long i = 0; i < cfg.n; ++i) y[i] += rng.normal(0.0, cfg.noise_sd);

  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> cols;
  DatasetRoles roles;
  for (int j = 0; j < p; ++j) {
    names.push_back("x" + std::to_string(j + 1));
    cols.push_back(X.col(j));
    roles.covariates.push_back(names.back());
  }
  names.push_back("y");
  cols.push_back(y);
  roles.outcome = "y";

  Dataset data(std::move(names), std::move(cols));
  data.set_roles(std::move(roles));
  return {std::move(data), std::move(beta)};
}

std::pair<Dataset, Eigen::VectorXd> dgp_sim2(const Sim2Config& cfg, std::uint64_t rep_index) {
  cfg.validate();
  const int d_count = cfg.n_groups;

  Rng truth_rng = Rng::keyed(cfg.seed, kStreamTruth);
  Eigen::VectorXd alpha(d_count), beta(d_count);
  for (int d = 0; d < d_count; ++d) {
    const bool active = truth_rng.bernoulli(cfg.theta);
    alpha[d] = truth_rng.uniform(-1.0, 1.0);
    beta[d] = active ? alpha[d] : 0.0;
  }

  const auto inv_logit = [](double t) { return 1.0 / (1.0 + std::exp(-t)); };

  for (int attempt = 0; attempt < 10; ++attempt) {
    Rng rng = Rng::keyed(cfg.seed, kStreamData + static_cast<std::uint64_t>(attempt), rep_index);
    Eigen::MatrixXd X(cfg.n, 5);
    Eigen::VectorXd g(cfg.n), a(cfg.n), y(cfg.n);
    for (long i = 0; i < cfg.n; ++i) {
      for (int j = 0; j < 5; ++j) X(i, j) = rng.uniform();
      const int gi = static_cast<int>(rng.below(static_cast<std::uint64_t>(d_count)));
      g[i] = gi + 1;
      const double prop = inv_logit(X(i, 0) + alpha[gi] - alpha[gi] * X(i, 1));
      a[i] = rng.bernoulli(prop) ? 1.0 : 0.0;
      const double mean_y =
          2.0 * X(i, 0) - 2.0 * X(i, 1) + 0.5 * X(i, 4) * X(i, 4) + beta[gi] * a[i];
      y[i] = rng.normal(mean_y, cfg.noise_sd);
    }

    // Every (group, arm) cell must be populated; otherwise redraw.
    Eigen::MatrixXd cells = Eigen::MatrixXd::Zero(d_count, 2);
    for (long i = 0; i < cfg.n; ++i) cells(static_cast<int>(g[i]) - 1, static_cast<int>(a[i])) += 1.0;
    if (cells.minCoeff() == 0.0) continue;

    std::vector<std::string> names = {"x1", "x2", "x3", "x4", "x5", "g", "a", "y"};
    std::vector<Eigen::VectorXd> cols = {X.col(0), X.col(1), X.col(2), X.col(3), X.col(4), g, a, y};
    DatasetRoles roles;
    roles.outcome = "y";
    roles.treatment = "a";
    roles.group = "g";
    roles.covariates = {"x1", "x2", "x3", "x4", "x5"};
    Dataset data(std::move(names), std::move(cols));
    data.set_roles(std::move(roles));
    return {std::move(data), std::move(beta)};
  }
  throw positivity_error("dgp_sim2: an empty (group, arm) cell persisted across 10 redraws");
}

MethodMetrics metrics(const Eigen::MatrixXd& estimates,
                      const std::vector<std::vector<Interval>>& cis,
                      const Eigen::VectorXd& truth) {
  const Eigen::Index reps = estimates.rows();
  const Eigen::Index d_count = estimates.cols();
  if (truth.size() != d_count) throw std::invalid_argument("metrics: truth length mismatch");
  if (reps < 1) throw std::invalid_argument("metrics: no replications");
  if (static_cast<Eigen::Index>(cis.size()) != reps) {
    throw std::invalid_argument("metrics: cis length mismatch");
  }

  const Eigen::MatrixXd err = estimates.rowwise() - truth.transpose();
  MethodMetrics out;
  out.bias_by_coord = err.colwise().mean();
  out.mse_by_coord = err.colwise().squaredNorm() / static_cast<double>(reps);
  out.var_by_coord = out.mse_by_coord - out.bias_by_coord.cwiseAbs2();
  out.me = out.bias_by_coord.mean();
  out.mse = out.mse_by_coord.mean();
  out.var = out.var_by_coord.mean();

  long covered = 0, total = 0;
  for (Eigen::Index r = 0; r < reps; ++r) {
    const auto& row = cis[static_cast<std::size_t>(r)];
    if (row.empty()) continue;
    if (static_cast<Eigen::Index>(row.size()) != d_count) {
      throw std::invalid_argument("metrics: interval row has wrong length");
    }
    for (Eigen::Index d = 0; d < d_count; ++d) {
      covered += row[static_cast<std::size_t>(d)].contains(truth[d]) ? 1 : 0;
      ++total;
    }
  }
  out.coverage = total > 0 ? static_cast<double>(covered) / static_cast<double>(total)
                           : std::numeric_limits<double>::quiet_NaN();
  return out;
}

void StudyConfig::validate() const {
  if (parallelism < 1) throw std::invalid_argument("study: parallelism must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("study: alpha must be in (0,1)");
  if (methods.empty()) throw std::invalid_argument("study: no methods requested");
  const int d_count = study == Study::sim1 ? sim1.n_covariates : sim2.n_groups;
  for (const auto& m : methods) {
    if (m == "none" || m == "l1" || m == "l2") continue;
    if (m == "eb") {
      if (d_count < 2) throw std::invalid_argument("study: eb needs at least two coordinates");
      continue;
    }
    if ((m == "lasso_reg" || m == "ridge_reg") && study == Study::sim1) continue;
    throw std::invalid_argument("study: unknown method '" + m + "'");
  }
  if (study == Study::sim1) {
    sim1.validate();
  } else {
    sim2.validate();
  }
}

namespace {

struct RepOutcome {
  bool ok = false;
  // method -> (estimates row, intervals row)
  std::vector<Eigen::VectorXd> estimates;
  std::vector<std::vector<Interval>> cis;
};

// The interval family a method is reported with: the penalized families
// for l2/eb (width adapts to the shrinkage), the basic family otherwise.
const std::vector<Interval>& primary_intervals(const std::string& method,
                                               const PenalizedEstimate& pe) {
  return (method == "l2" || method == "eb") ? pe.ci_shrunk : pe.ci_basic;
}

}  // namespace

SimulationReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const int reps = cfg.study == Study::sim1 ? cfg.sim1.reps : cfg.sim2.reps;
  const std::uint64_t seed = cfg.study == Study::sim1 ? cfg.sim1.seed : cfg.sim2.seed;
  const int d_count = cfg.study == Study::sim1 ? cfg.sim1.n_covariates : cfg.sim2.n_groups;

  Eigen::VectorXd truth =
      cfg.study == Study::sim1 ? dgp_sim1(cfg.sim1, 0).second : dgp_sim2(cfg.sim2, 0).second;

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));

  const auto run_one = [&](int rep) {
    RepOutcome out;
    out.estimates.resize(cfg.methods.size());
    out.cis.resize(cfg.methods.size());

    EstimateSet est;
    Dataset data;
    if (cfg.study == Study::sim1) {
      auto [d, tr] = dgp_sim1(cfg.sim1, static_cast<std::uint64_t>(rep));
      data = std::move(d);
      const std::uint64_t fold_seed =
          Rng::keyed(seed, kStreamFolds, static_cast<std::uint64_t>(rep)).next_u64();
      try {
        est = onestep_linear_assoc(data, cfg.sim1.K, cfg.sim1.learners, fold_seed, true).est;
      } catch (const convergence_error&) {
        LearnerConfig fallback = cfg.sim1.learners;
        fallback.kind = LearnerKind::ridge;
        est = onestep_linear_assoc(data, cfg.sim1.K, fallback, fold_seed, true).est;
      }
    } else {
      auto [d, tr] = dgp_sim2(cfg.sim2, static_cast<std::uint64_t>(rep));
      data = std::move(d);
      const std::uint64_t fold_seed =
          Rng::keyed(seed, kStreamFolds, static_cast<std::uint64_t>(rep)).next_u64();
      est = onestep_group_ate(data, cfg.sim2.K, cfg.sim2.learners, fold_seed, cfg.sim2.eps_trunc)
                .est;
    }

    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      const std::string& method = cfg.methods[m];
      if (method == "lasso_reg" || method == "ridge_reg") {
        LearnerConfig reg;
        reg.kind = method == "lasso_reg" ? LearnerKind::lasso : LearnerKind::ridge;
        const NuisanceFit f = fit(data.covariate_matrix(), data.outcome(), reg);
        out.estimates[m] = f.coef;
        out.cis[m].clear();  // the regression benchmarks report no intervals
        continue;
      }
      const PenalizedEstimate pe = penalize(est, penalty_method_from_string(method), cfg.alpha);
      out.estimates[m] = pe.psi_tilde;
      out.cis[m] = primary_intervals(method, pe);
    }
    out.ok = true;
    return out;
  };

  std::atomic<int> next_rep{0};
  std::atomic<int> skipped{0};
  const int workers = std::max(1, std::min(cfg.parallelism, reps));
  const auto worker = [&]() {
    for (;;) {
      const int rep = next_rep.fetch_add(1);
      if (rep >= reps) return;
      try {
        outcomes[static_cast<std::size_t>(rep)] = run_one(rep);
      } catch (const std::exception&) {
        skipped.fetch_add(1);  // recorded and skipped; >5% fails the study
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimulationReport report;
  report.study = cfg.study;
  report.reps_skipped = skipped.load();
  report.reps_completed = reps - report.reps_skipped;
  report.failed = report.reps_skipped * 20 > reps;  // strict 5% budget
  if (report.reps_completed == 0) {
    throw std::runtime_error("run_study: every replication failed");
  }

  for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
    Eigen::MatrixXd estimates(report.reps_completed, d_count);
    std::vector<std::vector<Interval>> cis(static_cast<std::size_t>(report.reps_completed));
    Eigen::Index row = 0;
    for (int rep = 0; rep < reps; ++rep) {
      const auto& oc = outcomes[static_cast<std::size_t>(rep)];
      if (!oc.ok) continue;
      estimates.row(row) = oc.estimates[m];
      cis[static_cast<std::size_t>(row)] = oc.cis[m];
      ++row;
    }
    MethodMetrics mm = metrics(estimates, cis, truth);
    report.per_method.emplace_back(cfg.methods[m], std::move(mm));

    if (cfg.keep_raw) {
      Eigen::Index raw_row = 0;
      for (int rep = 0; rep < reps; ++rep) {
        const auto& oc = outcomes[static_cast<std::size_t>(rep)];
        if (!oc.ok) continue;
        SimulationReport::RawRecord rec;
        rec.rep = rep;
        rec.method = cfg.methods[m];
        const Eigen::VectorXd err = oc.estimates[m] - truth;
        rec.mse = err.squaredNorm() / static_cast<double>(d_count);
        rec.me = err.mean();
        if (!oc.cis[m].empty()) {
          long cov = 0;
          for (int d = 0; d < d_count; ++d) {
            cov += oc.cis[m][static_cast<std::size_t>(d)].contains(truth[d]) ? 1 : 0;
          }
          rec.coverage = static_cast<double>(cov) / static_cast<double>(d_count);
        } else {
          rec.coverage = std::numeric_limits<double>::quiet_NaN();
        }
        report.raw.push_back(std::move(rec));
        ++raw_row;
      }
    }
  }

  // Ordered config echo for the report writer.
  report.scenario.emplace_back("study", to_string(cfg.study));
  if (cfg.study == Study::sim1) {
    report.scenario.emplace_back("n", std::to_string(cfg.sim1.n));
    report.scenario.emplace_back("n_covariates", std::to_string(cfg.sim1.n_covariates));
    report.scenario.emplace_back("theta", std::to_string(cfg.sim1.sparsity_theta));
    report.scenario.emplace_back("noise_sd", std::to_string(cfg.sim1.noise_sd));
    report.scenario.emplace_back("reps", std::to_string(cfg.sim1.reps));
    report.scenario.emplace_back("seed", std::to_string(cfg.sim1.seed));
    report.scenario.emplace_back("K", std::to_string(cfg.sim1.K));
    report.scenario.emplace_back("learner", to_string(cfg.sim1.learners.kind));
  } else {
    report.scenario.emplace_back("n", std::to_string(cfg.sim2.n));
    report.scenario.emplace_back("n_groups", std::to_string(cfg.sim2.n_groups));
    report.scenario.emplace_back("theta", std::to_string(cfg.sim2.theta));
    report.scenario.emplace_back("noise_sd", std::to_string(cfg.sim2.noise_sd));
    report.scenario.emplace_back("reps", std::to_string(cfg.sim2.reps));
    report.scenario.emplace_back("seed", std::to_string(cfg.sim2.seed));
    report.scenario.emplace_back("K", std::to_string(cfg.sim2.K));
    report.scenario.emplace_back("learner", to_string(cfg.sim2.learners.kind));
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace shrinkfit

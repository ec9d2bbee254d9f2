#include "shrinkfit/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "shrinkfit/csv.hpp"
#include "shrinkfit/errors.hpp"
#include "shrinkfit/estimators.hpp"
#include "shrinkfit/manifest.hpp"
#include "shrinkfit/penalty.hpp"
#include "shrinkfit/simulate.hpp"

namespace shrinkfit {

namespace {

void write_penalized_columns(std::ostream& out, const PenalizedEstimate& pe, Eigen::Index d) {
  out << ',' << csv::format_double(pe.psi_tilde[d]) << ',' << csv::format_double(pe.lambda) << ','
      << csv::format_double(pe.shrink_factor[d]) << ','
      << csv::format_double(pe.ci_basic[static_cast<std::size_t>(d)].lo) << ','
      << csv::format_double(pe.ci_basic[static_cast<std::size_t>(d)].hi) << ','
      << csv::format_double(pe.ci_shrunk[static_cast<std::size_t>(d)].lo) << ','
      << csv::format_double(pe.ci_shrunk[static_cast<std::size_t>(d)].hi);
}

constexpr const char* kPenalizedHeader =
    ",psi_tilde,lambda,shrink_factor,ci_basic_lo,ci_basic_hi,ci_shrunk_lo,ci_shrunk_hi";

}  // namespace

int cmd_penalize(const PenalizeArgs& args) {
  try {
    if (args.n < 1) throw std::invalid_argument("--n must be >= 1");
    RunManifest manifest;
    manifest.command = "penalize";
    manifest.stamp_start();
    manifest.config = {{"input", args.input},
                       {"output", args.output},
                       {"n", std::to_string(args.n)},
                       {"method", args.method},
                       {"alpha", csv::format_double(args.alpha)}};
    manifest.add_input(args.input);

    const csv::Table table = csv::read_file(args.input);
    const long label_col = table.column_index("label");
    const long psi_col = table.column_index("psi");
    const long se_col = table.column_index("se");
    if (label_col < 0 || psi_col < 0 || se_col < 0) {
      throw parse_error("input must have header 'label,psi,se'", 1);
    }
    if (table.rows.empty()) throw parse_error("no estimates in '" + args.input + "'");

    EstimateSet est;
    est.n = args.n;
    est.psi.resize(static_cast<long>(table.rows.size()));
    est.eif_var.resize(static_cast<long>(table.rows.size()));
    std::set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const long line = static_cast<long>(r) + 2;
      const std::string& label = table.rows[r][static_cast<std::size_t>(label_col)];
      if (!seen.insert(label).second) {
        throw parse_error("duplicate label '" + label + "'", line);
      }
      est.labels.push_back(label);
      est.psi[static_cast<long>(r)] = csv::parse_double(table.rows[r][static_cast<std::size_t>(psi_col)], line);
      const double se = csv::parse_double(table.rows[r][static_cast<std::size_t>(se_col)], line);
      if (se < 0.0) throw parse_error("negative standard error", line);
      est.eif_var[static_cast<long>(r)] = se * se * static_cast<double>(args.n);
    }

    const PenalizedEstimate pe =
        penalize(est, penalty_method_from_string(args.method), args.alpha);

    std::ofstream out(args.output);
    if (!out) throw std::runtime_error("cannot write '" + args.output + "'");
    out << "label,psi" << kPenalizedHeader << '\n';
    for (Eigen::Index d = 0; d < est.dim(); ++d) {
      out << est.labels[static_cast<std::size_t>(d)] << ',' << csv::format_double(est.psi[d]);
      write_penalized_columns(out, pe, d);
      out << '\n';
    }
    out.close();

    manifest.stamp_finish();
    write_manifest(args.output, manifest);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "penalize: " << e.what() << '\n';
    return 1;
  }
}

int cmd_estimate(const EstimateArgs& args) {
  try {
    RunManifest manifest;
    manifest.command = "estimate";
    manifest.stamp_start();
    manifest.seed = args.seed;
    std::string covs;
    for (const auto& c : args.covariates) covs += (covs.empty() ? "" : ";") + c;
    manifest.config = {{"data", args.data},
                       {"parameter", args.parameter},
                       {"outcome", args.outcome},
                       {"treatment", args.treatment},
                       {"group", args.group},
                       {"covariates", covs},
                       {"folds", std::to_string(args.folds)},
                       {"seed", std::to_string(args.seed)},
                       {"penalize", args.penalize_method},
                       {"alpha", csv::format_double(args.alpha)},
                       {"learner", args.learner},
                       {"output", args.output}};
    manifest.add_input(args.data);

    Dataset data = csv::read_dataset(args.data);
    DatasetRoles roles;
    const auto require_role = [&data](const std::string& flag, const std::string& col) {
      if (col.empty()) {
        throw std::invalid_argument("missing required role: --" + flag);
      }
      if (!data.has_column(col)) {
        throw std::invalid_argument("role --" + flag + " names column '" + col +
                                    "' which is not in the data");
      }
    };
    require_role("outcome", args.outcome);
    roles.outcome = args.outcome;
    for (const auto& c : args.covariates) {
      require_role("covariates", c);
      roles.covariates.push_back(c);
    }

    LearnerConfig learners;
    learners.kind = learner_kind_from_string(args.learner);
    learners.squared_terms = args.squared_terms;

    OneStepResult res;
    std::vector<long> group_sizes;
    bool with_srr = false;
    EstimateSet srr_est;

    if (args.parameter == "linear-assoc") {
      if (roles.covariates.empty()) {
        throw std::invalid_argument("linear-assoc requires --covariates");
      }
      data.set_roles(roles);
      res = onestep_linear_assoc(data, args.folds, learners, args.seed, args.scaled);
    } else if (args.parameter == "group-ate") {
      require_role("treatment", args.treatment);
      require_role("group", args.group);
      roles.treatment = args.treatment;
      roles.group = args.group;
      data.set_roles(roles);
      res = onestep_group_ate(data, args.folds, learners, args.seed, args.eps_trunc);
      const auto& g = data.group();
      group_sizes.assign(static_cast<std::size_t>(res.est.dim()), 0);
      for (Eigen::Index i = 0; i < g.size(); ++i) ++group_sizes[static_cast<std::size_t>(g[i]) - 1];
    } else if (args.parameter == "indirect-std") {
      require_role("treatment", args.treatment);
      roles.treatment = args.treatment;
      data.set_roles(roles);
      res = onestep_indirect_std(data, args.folds, learners, args.seed, args.eps_trunc);
      const auto& a = data.treatment();
      group_sizes.assign(static_cast<std::size_t>(res.est.dim()), 0);
      for (Eigen::Index i = 0; i < a.size(); ++i) ++group_sizes[static_cast<std::size_t>(a[i]) - 1];

      // Observed per-provider outcome means feed the centered ratio.
      std::vector<int> providers(static_cast<std::size_t>(a.size()));
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        providers[static_cast<std::size_t>(i)] = static_cast<int>(a[i]);
      }
      const NuisanceFit gm = fit_group_mean(providers, data.outcome());
      srr_est = srr(res.est, gm.group_means);
      with_srr = true;
    } else {
      throw std::invalid_argument(
          "unknown --parameter '" + args.parameter +
          "' (expected linear-assoc, group-ate, or indirect-std)");
    }

    if (res.est.labels.empty()) {
      for (Eigen::Index d = 0; d < res.est.dim(); ++d) {
        res.est.labels.push_back(std::to_string(d + 1));
      }
    }

    PenalizedEstimate pe;
    const bool penalized = !args.penalize_method.empty() && args.penalize_method != "none";
    if (penalized) {
      pe = penalize(res.est, penalty_method_from_string(args.penalize_method), args.alpha);
    }

    std::ofstream out(args.output);
    if (!out) throw std::runtime_error("cannot write '" + args.output + "'");
    out << "label,psi,se";
    if (!group_sizes.empty()) out << ",n_group";
    if (with_srr) out << ",srr,srr_se";
    if (penalized) out << kPenalizedHeader;
    out << '\n';
    for (Eigen::Index d = 0; d < res.est.dim(); ++d) {
      out << res.est.labels[static_cast<std::size_t>(d)] << ','
          << csv::format_double(res.est.psi[d]) << ',' << csv::format_double(res.est.se(d));
      if (!group_sizes.empty()) out << ',' << group_sizes[static_cast<std::size_t>(d)];
      if (with_srr) {
        out << ',' << csv::format_double(srr_est.psi[d]) << ','
            << csv::format_double(srr_est.se(d));
      }
      if (penalized) write_penalized_columns(out, pe, d);
      out << '\n';
    }
    out.close();

    manifest.stamp_finish();
    write_manifest(args.output, manifest);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "estimate: " << e.what() << '\n';
    return 1;
  }
}

namespace {

StudyConfig parse_study_config(const std::string& path, const SimulateArgs& args) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config '" + path + "'");

  StudyConfig cfg;
  bool parallelism_from_file = false;
  int file_parallelism = 1;
  std::string learner;
  bool squared_terms_set = false, squared_terms = false;

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string{};
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw parse_error("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw parse_error("expected 'key = value'", line_no);

    const auto as_long = [&]() { return static_cast<long>(csv::parse_double(value, line_no)); };
    const auto as_double = [&]() { return csv::parse_double(value, line_no); };

    if (key == "study") {
      cfg.study = study_from_string(value);
    } else if (key == "n") {
      cfg.sim1.n = as_long();
      cfg.sim2.n = cfg.sim1.n;
    } else if (key == "reps") {
      cfg.sim1.reps = static_cast<int>(as_long());
      cfg.sim2.reps = cfg.sim1.reps;
    } else if (key == "seed") {
      cfg.sim1.seed = static_cast<std::uint64_t>(as_long());
      cfg.sim2.seed = cfg.sim1.seed;
    } else if (key == "noise_sd") {
      cfg.sim1.noise_sd = as_double();
      cfg.sim2.noise_sd = cfg.sim1.noise_sd;
    } else if (key == "theta") {
      cfg.sim1.sparsity_theta = as_double();
      cfg.sim2.theta = cfg.sim1.sparsity_theta;
    } else if (key == "K") {
      cfg.sim1.K = static_cast<int>(as_long());
      cfg.sim2.K = cfg.sim1.K;
    } else if (key == "n_covariates") {
      cfg.sim1.n_covariates = static_cast<int>(as_long());
    } else if (key == "n_groups") {
      cfg.sim2.n_groups = static_cast<int>(as_long());
    } else if (key == "eps_trunc") {
      cfg.sim2.eps_trunc = as_double();
    } else if (key == "alpha") {
      cfg.alpha = as_double();
    } else if (key == "methods") {
      cfg.methods.clear();
      std::stringstream ss(value);
      std::string tok;
      while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) cfg.methods.push_back(tok);
      }
    } else if (key == "parallelism") {
      file_parallelism = static_cast<int>(as_long());
      parallelism_from_file = true;
    } else if (key == "learner") {
      learner = value;
    } else if (key == "squared_terms") {
      squared_terms = as_long() != 0;
      squared_terms_set = true;
    } else {
      throw parse_error("unknown config key '" + key + "'", line_no);
    }
  }

  if (!learner.empty()) {
    cfg.sim1.learners.kind = learner_kind_from_string(learner);
    cfg.sim2.learners.kind = cfg.sim1.learners.kind;
  }
  if (squared_terms_set) {
    cfg.sim1.learners.squared_terms = squared_terms;
    cfg.sim2.learners.squared_terms = squared_terms;
  }

  cfg.parallelism = parallelism_from_file ? file_parallelism : 1;
  if (args.parallelism > 0) cfg.parallelism = args.parallelism;
  if (const char* env = std::getenv("SHRINKFIT_THREADS")) {
    const int threads = std::atoi(env);
    if (threads > 0) cfg.parallelism = threads;
  }
  cfg.keep_raw = !args.raw_output.empty();
  return cfg;
}

std::string coverage_field(double coverage) {
  return std::isnan(coverage) ? std::string{} : csv::format_double(coverage);
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  try {
    RunManifest manifest;
    manifest.command = "simulate";
    manifest.stamp_start();
    manifest.add_input(args.config_path);

    const StudyConfig cfg = parse_study_config(args.config_path, args);
    cfg.validate();
    manifest.seed = cfg.study == Study::sim1 ? cfg.sim1.seed : cfg.sim2.seed;

    const SimulationReport report = run_study(cfg);

    for (const auto& [k, v] : report.scenario) manifest.config.emplace_back(k, v);
    manifest.config.emplace_back("parallelism", std::to_string(cfg.parallelism));

    std::ofstream out(args.output);
    if (!out) throw std::runtime_error("cannot write '" + args.output + "'");
    for (const auto& [k, v] : report.scenario) out << k << ',';
    out << "method,mse_x100,me_x100,var_x100,coverage95,reps_completed\n";
    for (const auto& [method, mm] : report.per_method) {
      for (const auto& [k, v] : report.scenario) out << v << ',';
      out << method << ',' << csv::format_double(mm.mse * 100.0) << ','
          << csv::format_double(mm.me * 100.0) << ',' << csv::format_double(mm.var * 100.0) << ','
          << coverage_field(mm.coverage) << ',' << report.reps_completed << '\n';
    }
    out.close();
    manifest.stamp_finish();
    write_manifest(args.output, manifest);

    if (!args.raw_output.empty()) {
      std::ofstream raw(args.raw_output);
      if (!raw) throw std::runtime_error("cannot write '" + args.raw_output + "'");
      raw << "rep,method,mse_x100,me_x100,coverage95\n";
      for (const auto& rec : report.raw) {
        raw << rec.rep << ',' << rec.method << ',' << csv::format_double(rec.mse * 100.0) << ','
            << csv::format_double(rec.me * 100.0) << ',' << coverage_field(rec.coverage) << '\n';
      }
      raw.close();
      write_manifest(args.raw_output, manifest);
    }

    if (report.failed) {
      std::cerr << "simulate: " << report.reps_skipped << " of "
                << report.reps_completed + report.reps_skipped
                << " replications failed (over the 5% budget)\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace shrinkfit

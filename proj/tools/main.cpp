#include <CLI11.hpp>

#include "shrinkfit/cli.hpp"
#include "shrinkfit/manifest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"shrinkfit: penalized post-processing for efficient estimators"};
  app.set_version_flag("--version", std::string(shrinkfit::kVersion));
  app.require_subcommand(1);

  shrinkfit::PenalizeArgs pen;
  auto* penalize = app.add_subcommand(
      "penalize", "Shrink a CSV of estimates (label,psi,se) and attach confidence intervals");
  penalize->add_option("--input", pen.input, "input CSV with header label,psi,se")->required();
  penalize->add_option("--n", pen.n, "sample size behind the estimates")->required();
  penalize->add_option("--method", pen.method, "l1 | l2 | eb | none")->default_val("none");
  penalize->add_option("--alpha", pen.alpha, "two-sided CI level")->default_val(0.05);
  penalize->add_option("--output", pen.output, "output CSV path")->required();

  shrinkfit::EstimateArgs est;
  auto* estimate = app.add_subcommand(
      "estimate", "Cross-fitted one-step estimation from a data CSV, optionally penalized");
  estimate->add_option("--data", est.data, "data CSV path")->required();
  estimate->add_option("--parameter", est.parameter, "linear-assoc | group-ate | indirect-std")
      ->required();
  estimate->add_option("--outcome", est.outcome, "outcome column")->required();
  estimate->add_option("--treatment", est.treatment, "treatment column");
  estimate->add_option("--group", est.group, "group column");
  estimate->add_option("--covariates", est.covariates, "covariate columns")
      ->required()
      ->delimiter(',');
  estimate->add_option("--folds", est.folds, "cross-fitting folds")->default_val(5);
  estimate->add_option("--seed", est.seed, "fold-assignment seed")->default_val(1);
  estimate->add_option("--penalize", est.penalize_method, "l1 | l2 | eb | none");
  estimate->add_option("--alpha", est.alpha, "two-sided CI level")->default_val(0.05);
  estimate->add_option("--learner", est.learner, "ols | ridge | lasso")->default_val("ols");
  estimate->add_flag("--squared-terms", est.squared_terms,
                     "expand outcome-model features with squared covariates");
  estimate->add_flag("!--unscaled", est.scaled,
                     "linear-assoc: keep the raw conditional-covariance scale");
  estimate->add_option("--eps-trunc", est.eps_trunc, "propensity truncation")->default_val(0.01);
  estimate->add_option("--output", est.output, "output CSV path")->required();

  shrinkfit::SimulateArgs sim;
  auto* simulate =
      app.add_subcommand("simulate", "Run a replication study from a key-value config file");
  simulate->add_option("--config", sim.config_path, "config file")->required();
  simulate->add_option("--output", sim.output, "report CSV path")->required();
  simulate->add_option("--parallelism", sim.parallelism,
                       "worker threads (SHRINKFIT_THREADS overrides)");
  simulate->add_option("--raw-output", sim.raw_output, "optional per-replication CSV");

  CLI11_PARSE(app, argc, argv);

  if (penalize->parsed()) return shrinkfit::cmd_penalize(pen);
  if (estimate->parsed()) return shrinkfit::cmd_estimate(est);
  if (simulate->parsed()) return shrinkfit::cmd_simulate(sim);
  return 1;
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace shrinkfit {

struct PenalizeArgs {
  std::string input;
  std::string output;
  long n = 0;
  std::string method = "none";
  double alpha = 0.05;
};

struct EstimateArgs {
  std::string data;
  std::string parameter;  // linear-assoc | group-ate | indirect-std
  std::string outcome;
  std::string treatment;
  std::string group;
  std::vector<std::string> covariates;
  int folds = 5;
  std::uint64_t seed = 1;
  std::string penalize_method;  // empty: report unpenalized only
  double alpha = 0.05;
  std::string learner = "ols";
  bool squared_terms = false;
  bool scaled = true;  // linear-assoc only
  double eps_trunc = 0.01;
  std::string output;
};

struct SimulateArgs {
  std::string config_path;
  std::string output;
  int parallelism = 0;  // 0: value from the config file (default 1)
  std::string raw_output;
};

// Each command returns a process exit status: 0 on success, nonzero on
// any error or study-level failure, with a diagnostic on stderr.
int cmd_penalize(const PenalizeArgs& args);
int cmd_estimate(const EstimateArgs& args);
int cmd_simulate(const SimulateArgs& args);

}  // namespace shrinkfit

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace shrinkfit {

// Column roles used by the estimators. Unused roles stay empty.
struct DatasetRoles {
  std::string outcome;
  std::string treatment;
  std::string group;
  std::vector<std::string> covariates;
};

// Columnar dataset of named numeric vectors. All values must be finite
// at construction; missing values are rejected at ingestion, not imputed.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<std::string> names, std::vector<Eigen::VectorXd> columns);

  long n_rows() const { return n_rows_; }
  const std::vector<std::string>& names() const { return names_; }
  bool has_column(const std::string& name) const;
  const Eigen::VectorXd& column(const std::string& name) const;

  void set_roles(DatasetRoles roles);
  const DatasetRoles& roles() const { return roles_; }

  const Eigen::VectorXd& outcome() const { return column(roles_.outcome); }
  const Eigen::VectorXd& treatment() const { return column(roles_.treatment); }
  const Eigen::VectorXd& group() const { return column(roles_.group); }
  Eigen::MatrixXd covariate_matrix() const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> columns_;
  DatasetRoles roles_;
  long n_rows_ = 0;
};

// Role validation helpers. require_binary throws std::invalid_argument
// unless every entry is 0 or 1; require_categorical checks entries are
// integers in [1, D] and returns D (the maximum level).
void require_binary(const Eigen::VectorXd& col, const std::string& name);
int require_categorical(const Eigen::VectorXd& col, const std::string& name);

}  // namespace shrinkfit

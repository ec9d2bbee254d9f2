#include "shrinkfit/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace shrinkfit {

Dataset::Dataset(std::vector<std::string> names, std::vector<Eigen::VectorXd> columns)
    : names_(std::move(names)), columns_(std::move(columns)) {
  if (names_.size() != columns_.size()) {
    throw std::invalid_argument("Dataset: name/column count mismatch");
  }
  if (columns_.empty()) throw std::invalid_argument("Dataset: no columns");
  n_rows_ = columns_.front().size();
  if (n_rows_ < 1) throw std::invalid_argument("Dataset: empty columns");
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != n_rows_) {
      throw std::invalid_argument("Dataset: column '" + names_[c] + "' has ragged length");
    }
    for (Eigen::Index i = 0; i < n_rows_; ++i) {
      if (!std::isfinite(columns_[c][i])) {
        throw std::invalid_argument("Dataset: column '" + names_[c] +
                                    "' has a missing or non-finite value at row " +
                                    std::to_string(i + 1));
      }
    }
  }
}

bool Dataset::has_column(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

const Eigen::VectorXd& Dataset::column(const std::string& name) const {
  for (std::size_t c = 0; c < names_.size(); ++c) {
    if (names_[c] == name) return columns_[c];
  }
  throw std::invalid_argument("Dataset: no column named '" + name + "'");
}

void Dataset::set_roles(DatasetRoles roles) {
  if (roles.outcome.empty()) throw std::invalid_argument("Dataset: outcome role is required");
  column(roles.outcome);  // existence checks
  if (!roles.treatment.empty()) column(roles.treatment);
  if (!roles.group.empty()) column(roles.group);
  for (const auto& c : roles.covariates) column(c);
  roles_ = std::move(roles);
}

Eigen::MatrixXd Dataset::covariate_matrix() const {
  Eigen::MatrixXd X(n_rows_, static_cast<Eigen::Index>(roles_.covariates.size()));
  for (std::size_t c = 0; c < roles_.covariates.size(); ++c) {
    X.col(static_cast<Eigen::Index>(c)) = column(roles_.covariates[c]);
  }
  return X;
}

void require_binary(const Eigen::VectorXd& col, const std::string& name) {
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    if (col[i] != 0.0 && col[i] != 1.0) {
      throw std::invalid_argument("column '" + name + "' must be binary {0,1}; found " +
                                  std::to_string(col[i]) + " at row " + std::to_string(i + 1));
    }
  }
}

int require_categorical(const Eigen::VectorXd& col, const std::string& name) {
  int max_level = 0;
  for (Eigen::Index i = 0; i < col.size(); ++i) {
    const double v = col[i];
    if (v != std::floor(v) || v < 1.0 || v > 1e9) {
      throw std::invalid_argument("column '" + name + "' must contain integer levels >= 1; found " +
                                  std::to_string(v) + " at row " + std::to_string(i + 1));
    }
    max_level = std::max(max_level, static_cast<int>(v));
  }
  return max_level;
}

}  // namespace shrinkfit

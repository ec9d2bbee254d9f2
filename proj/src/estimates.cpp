#include "shrinkfit/estimates.hpp"

#include <cmath>
#include <stdexcept>

namespace shrinkfit {

double EstimateSet::se(Eigen::Index d) const {
  return std::sqrt(eif_var[d] / static_cast<double>(n));
}

Eigen::VectorXd EstimateSet::se_vector() const {
  return (eif_var / static_cast<double>(n)).cwiseSqrt();
}

void EstimateSet::validate() const {
  if (psi.size() < 1) throw std::invalid_argument("EstimateSet: empty estimate vector");
  if (eif_var.size() != psi.size()) {
    throw std::invalid_argument("EstimateSet: psi and eif_var lengths differ");
  }
  if (n < 1) throw std::invalid_argument("EstimateSet: n must be >= 1");
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != psi.size()) {
    throw std::invalid_argument("EstimateSet: label count does not match dimension");
  }
  for (Eigen::Index d = 0; d < psi.size(); ++d) {
    if (!std::isfinite(psi[d])) throw std::invalid_argument("EstimateSet: non-finite estimate");
    if (!(eif_var[d] >= 0.0)) {
      throw std::invalid_argument("EstimateSet: eif_var must be non-negative");
    }
  }
}

std::string to_string(PenaltyMethod m) {
  switch (m) {
    case PenaltyMethod::None: return "none";
    case PenaltyMethod::L1: return "l1";
    case PenaltyMethod::L2: return "l2";
    case PenaltyMethod::EB: return "eb";
  }
  return "none";
}

PenaltyMethod penalty_method_from_string(const std::string& name) {
  if (name == "none" || name == "None" || name == "NONE") return PenaltyMethod::None;
  if (name == "l1" || name == "L1") return PenaltyMethod::L1;
  if (name == "l2" || name == "L2") return PenaltyMethod::L2;
  if (name == "eb" || name == "EB") return PenaltyMethod::EB;
  throw std::invalid_argument("unknown penalty method: " + name);
}

}  // namespace shrinkfit

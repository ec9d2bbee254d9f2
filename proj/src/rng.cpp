#include "shrinkfit/rng.hpp"

#include "shrinkfit/normal.hpp"

namespace shrinkfit {

double Rng::normal() {
  // Shift by half an ulp-grid step so the argument stays inside (0, 1).
  double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return normal_quantile(u);
}

}  // namespace shrinkfit

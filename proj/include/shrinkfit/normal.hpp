#pragma once

namespace shrinkfit {

// Density and CDF of N(mean, var). var = 0 degenerates to a point mass.
double normal_pdf(double x, double mean = 0.0, double var = 1.0);
double normal_cdf(double x, double mean = 0.0, double var = 1.0);

// Standard normal quantile. Acklam's rational approximation polished with
// one Halley step, giving |error| well below 1e-9 while staying
// dependency-free and bit-stable across platforms.
double normal_quantile(double p);

// q_{1 - alpha/2}, the two-sided critical value for level alpha in (0,1).
double two_sided_critical_value(double alpha);

}  // namespace shrinkfit

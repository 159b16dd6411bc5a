#pragma once

#include <cstdint>

namespace arht::stats {

// Standard normal density.
double normal_pdf(double x);

// Upper one-sided tail P(Z > z) for Z ~ N(0, 1), computed through erfc.
// Absolute error below 1e-12 over |z| <= 8.
double normal_upper_tail(double z);

// Density of the F(d1, d2) distribution; zero for x <= 0. Evaluated through
// the log-beta function so that large (d1, d2) such as F(1000, 1000) stay
// finite.
double f_pdf(double x, double d1, double d2);

// H_m = sum_{j=1}^{m} 1/j.
double harmonic(std::int64_t m);

}  // namespace arht::stats

#include "arht/stats.hpp"

#include <cmath>
#include <limits>

namespace arht::stats {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048;
}  // namespace

namespace {
// Subnormal densities carry no statistical meaning and trip strict CSV
// parsers; flush them to an exact zero.
double flush_subnormal(double v) {
    return v < std::numeric_limits<double>::min() ? 0.0 : v;
}
}  // namespace

double normal_pdf(double x) {
    return flush_subnormal(kInvSqrt2Pi * std::exp(-0.5 * x * x));
}

double normal_upper_tail(double z) {
    return 0.5 * std::erfc(z * kInvSqrt2);
}

double f_pdf(double x, double d1, double d2) {
    if (x <= 0.0) {
        return 0.0;
    }
    double a = 0.5 * d1;
    double b = 0.5 * d2;
    double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double log_f = a * std::log(d1 / d2) + (a - 1.0) * std::log(x) -
                   (a + b) * std::log1p(d1 * x / d2) - log_beta;
    return flush_subnormal(std::exp(log_f));
}

double harmonic(std::int64_t m) {
    double h = 0.0;
    for (std::int64_t j = 1; j <= m; ++j) {
        h += 1.0 / static_cast<double>(j);
    }
    return h;
}

}  // namespace arht::stats

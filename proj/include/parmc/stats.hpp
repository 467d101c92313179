#ifndef PARMC_STATS_HPP
#define PARMC_STATS_HPP

#include <span>
#include <vector>

namespace parmc {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares of ys on xs. Requires >= 2 points and
// non-constant xs. Constant ys give slope 0 and r_squared 1.
LinearFit linear_fit(std::span<const double> xs, std::span<const double> ys);

// OLS on (ln x, ln y). Requires >= 3 strictly positive points.
LinearFit fit_loglog(std::span<const double> xs, std::span<const double> ys);

double mean_of(std::span<const double> xs);

// Unbiased sample variance (n-1 denominator); requires >= 2 points.
double variance_of(std::span<const double> xs);

// Empirical q-quantile with linear interpolation between the two closest
// order statistics. `sorted` must be ascending and non-empty, q in [0,1].
double quantile_sorted(std::span<const double> sorted, double q);

// Convenience wrapper that copies and sorts.
double quantile_of(std::vector<double> xs, double q);

double normal_cdf(double x);

}  // namespace parmc

#endif

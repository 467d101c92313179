#ifndef PARMC_TAILS_HPP
#define PARMC_TAILS_HPP

#include <cstdint>
#include <span>
#include <variant>

#include "parmc/stats.hpp"

namespace parmc {

// Tail descriptions of a per-replication cost distribution.
namespace tail {

struct FiniteMoment {
  double p;  // highest finite moment order, > 0
};

// P(X - mean > t) <= exp(-t/nu), P(X - mean < -t) <= exp(-t/alpha).
struct SubExponential {
  double nu;
  double alpha;
  double mean;
};

// MGF bound exp(sigma2 * l^2 / 2) around the mean.
struct SubGaussian {
  double sigma2;
  double mean;
};

// P(X > x) ~ C * x^(-gamma).
struct RegularVarying {
  double C;
  double gamma;
};

// P(X > x) ~ exp(-alpha * x).
struct ExactExponential {
  double alpha;
};

struct Normal {
  double mu;
  double sigma2;
};

}  // namespace tail

using TailModel =
    std::variant<tail::FiniteMoment, tail::SubExponential, tail::SubGaussian,
                 tail::RegularVarying, tail::ExactExponential, tail::Normal>;

// Closed-form upper bound on E[max of n i.i.d. draws]. Supported for
// SubExponential (mean + nu(ln n + 1)) and SubGaussian
// (mean + sigma sqrt(2 ln n) + 1/sqrt(2 ln 2)); other variants have only
// asymptotic statements and raise a domain error.
double bound_expected_max(const TailModel& model, std::uint64_t n);

// Asymptotic q-quantile of the max of n i.i.d. draws, for models with a
// known extreme-value limit:
//   RegularVarying -> Frechet:  n^{1/gamma} (C / -ln q)^{1/gamma}
//   ExactExponential -> Gumbel: (ln n - ln(-ln q)) / alpha
//   Normal -> Gumbel:           mu + sigma (c_n + u/c_n), c_n = sqrt(2 ln n),
//                               u = -ln(-ln q), n >= 2
double evt_quantile(const TailModel& model, std::uint64_t n, double q);

// Empirical q-quantile of observed maxima (linear interpolation between
// order statistics).
double empirical_max_quantile(std::span<const double> maxima_samples,
                              double q);

// Regresses ln P[X > t] on t over thresholds spanning
// [median, 99th percentile]. slope estimates the exponential decay rate
// (expected <= 0); r_squared reports fit quality. Needs >= 10 positive
// samples; constant samples raise FitError.
struct TailFit {
  double slope = 0.0;
  double r_squared = 0.0;
};

TailFit fit_tail_exponent(std::span<const double> survival_samples);

}  // namespace parmc

#endif

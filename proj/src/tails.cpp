#include "parmc/tails.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "parmc/errors.hpp"

namespace parmc {

namespace {

constexpr double kInvSqrt2Ln2 = 0.84932180028801904272;  // 1/sqrt(2 ln 2)

void check_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0)
    throw DomainError(std::string(what) + " must be finite and > 0");
}

}  // namespace

double bound_expected_max(const TailModel& model, std::uint64_t n) {
  if (n == 0) throw DomainError("bound_expected_max: n must be >= 1");
  const double ln_n = std::log(static_cast<double>(n));
  if (const auto* se = std::get_if<tail::SubExponential>(&model)) {
    check_positive(se->nu, "bound_expected_max: nu");
    return se->mean + se->nu * (ln_n + 1.0);
  }
  if (const auto* sg = std::get_if<tail::SubGaussian>(&model)) {
    check_positive(sg->sigma2, "bound_expected_max: sigma2");
    return sg->mean + std::sqrt(sg->sigma2) * std::sqrt(2.0 * ln_n) +
           kInvSqrt2Ln2;
  }
  throw DomainError(
      "bound_expected_max: closed form exists only for sub-exponential and "
      "sub-Gaussian models");
}

double evt_quantile(const TailModel& model, std::uint64_t n, double q) {
  if (n == 0) throw DomainError("evt_quantile: n must be >= 1");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("evt_quantile: q outside (0,1)");
  const double u = -std::log(-std::log(q));
  if (const auto* rv = std::get_if<tail::RegularVarying>(&model)) {
    check_positive(rv->C, "evt_quantile: C");
    check_positive(rv->gamma, "evt_quantile: gamma");
    const double scale = std::pow(rv->C / (-std::log(q)), 1.0 / rv->gamma);
    return std::pow(static_cast<double>(n), 1.0 / rv->gamma) * scale;
  }
  if (const auto* ee = std::get_if<tail::ExactExponential>(&model)) {
    check_positive(ee->alpha, "evt_quantile: alpha");
    return (std::log(static_cast<double>(n)) + u) / ee->alpha;
  }
  if (const auto* nm = std::get_if<tail::Normal>(&model)) {
    check_positive(nm->sigma2, "evt_quantile: sigma2");
    if (n < 2) throw DomainError("evt_quantile: Normal model needs n >= 2");
    const double c_n = std::sqrt(2.0 * std::log(static_cast<double>(n)));
    return nm->mu + std::sqrt(nm->sigma2) * (c_n + u / c_n);
  }
  throw DomainError(
      "evt_quantile: supported models are RegularVarying, ExactExponential "
      "and Normal");
}

double empirical_max_quantile(std::span<const double> maxima_samples,
                              double q) {
  if (maxima_samples.empty())
    throw DomainError("empirical_max_quantile: empty sample");
  if (!(q > 0.0 && q < 1.0))
    throw DomainError("empirical_max_quantile: q outside (0,1)");
  std::vector<double> sorted(maxima_samples.begin(), maxima_samples.end());
  std::sort(sorted.begin(), sorted.end());
  return quantile_sorted(sorted, q);
}

TailFit fit_tail_exponent(std::span<const double> survival_samples) {
  if (survival_samples.size() < 10)
    throw DomainError("fit_tail_exponent: need at least 10 samples");
  std::vector<double> sorted(survival_samples.begin(), survival_samples.end());
  for (double x : sorted)
    if (!(x > 0.0) || !std::isfinite(x))
      throw DomainError("fit_tail_exponent: samples must be positive");
  std::sort(sorted.begin(), sorted.end());

  const double lo = quantile_sorted(sorted, 0.5);
  const double hi = quantile_sorted(sorted, 0.99);
  if (!(hi > lo)) throw FitError("fit_tail_exponent: degenerate sample range");

  // Thresholds: the distinct sample values in [lo, hi] when few (keeps the
  // survival curve exact for integer-valued data), otherwise an even grid.
  std::vector<double> thresholds;
  {
    std::set<double> distinct;
    for (double x : sorted)
      if (x >= lo && x <= hi) distinct.insert(x);
    if (distinct.size() >= 3 && distinct.size() <= 64) {
      thresholds.assign(distinct.begin(), distinct.end());
    } else {
      const int k = 64;
      thresholds.reserve(k);
      for (int i = 0; i < k; ++i)
        thresholds.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                      static_cast<double>(k - 1));
    }
  }

  const double n = static_cast<double>(sorted.size());
  std::vector<double> ts, log_surv;
  for (double t : thresholds) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
    const double above = static_cast<double>(sorted.end() - it);
    if (above <= 0.0) continue;  // log undefined past the sample maximum
    ts.push_back(t);
    log_surv.push_back(std::log(above / n));
  }
  if (ts.size() < 3)
    throw FitError("fit_tail_exponent: too few usable thresholds");

  LinearFit fit;
  try {
    fit = linear_fit(ts, log_surv);
  } catch (const FitError&) {
    throw FitError("fit_tail_exponent: degenerate thresholds");
  }
  return TailFit{fit.slope, fit.r_squared};
}

}  // namespace parmc

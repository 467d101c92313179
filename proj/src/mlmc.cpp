#include "parmc/mlmc.hpp"

#include <algorithm>
#include <cmath>

#include "parmc/errors.hpp"

namespace parmc {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

LevelFamily::LevelFamily(double alpha, double beta, double gamma, double c2,
                         double c3)
    : alpha_(alpha), beta_(beta), gamma_(gamma), c2_(c2), c3_(c3) {
  require(std::isfinite(alpha) && alpha > 0.0,
          "LevelFamily: alpha must be > 0");
  require(std::isfinite(beta) && beta > 0.0, "LevelFamily: beta must be > 0");
  require(std::isfinite(gamma) && gamma >= 0.0,
          "LevelFamily: gamma must be >= 0");
  require(beta > gamma, "LevelFamily: requires beta > gamma");
  require(alpha >= std::max(beta, gamma) / 2.0,
          "LevelFamily: requires alpha >= max(beta, gamma)/2");
  require(std::isfinite(c2) && c2 >= 0.0, "LevelFamily: c2 must be >= 0");
  require(std::isfinite(c3) && c3 > 0.0, "LevelFamily: c3 must be > 0");
  c1_ = std::exp2(-alpha_);
}

double LevelFamily::mean_delta(std::uint64_t level) const {
  const double l = static_cast<double>(level);
  return std::exp2(-alpha_ * l) * (1.0 - std::exp2(-alpha_));
}

double LevelFamily::var_delta(std::uint64_t level) const {
  return c2_ * std::exp2(-beta_ * static_cast<double>(level));
}

std::uint64_t LevelFamily::cost_ticks(std::uint64_t level) const {
  const double raw = c3_ * std::exp2(gamma_ * static_cast<double>(level));
  if (!(raw < 9.0e18))
    throw DomainError("LevelFamily: level cost overflows tick counter");
  return static_cast<std::uint64_t>(std::ceil(raw));
}

double LevelFamily::partial_mean(std::uint64_t max_level) const {
  return 1.0 - std::exp2(-alpha_ * static_cast<double>(max_level + 1));
}

CostedSample LevelFamily::sample_delta(std::uint64_t level,
                                       RngStream& stream) const {
  const double v = var_delta(level);
  double value = mean_delta(level);
  if (v > 0.0) value += std::sqrt(v) * stream.normal();
  return CostedSample{value, cost_ticks(level)};
}

LevelFamily synthetic_family(double alpha, double beta, double gamma,
                             double c2, double c3) {
  return LevelFamily(alpha, beta, gamma, c2, c3);
}

LevelPmf LevelPmf::geometric(double ratio) {
  require(std::isfinite(ratio) && ratio > 0.0 && ratio < 1.0,
          "LevelPmf: ratio must lie in (0,1)");
  LevelPmf pmf;
  pmf.ratio_ = ratio;
  return pmf;
}

LevelPmf LevelPmf::finite(std::vector<double> weights) {
  require(!weights.empty(), "LevelPmf: empty weight table");
  double sum = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w > 0.0,
            "LevelPmf: weights must be strictly positive");
    sum += w;
  }
  LevelPmf pmf;
  pmf.probs_.resize(weights.size());
  pmf.cum_probs_.resize(weights.size());
  double cum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    pmf.probs_[i] = weights[i] / sum;
    cum += pmf.probs_[i];
    pmf.cum_probs_[i] = cum;
  }
  pmf.cum_probs_.back() = 1.0;
  return pmf;
}

double LevelPmf::prob(std::uint64_t level) const {
  if (ratio_) {
    const double r = *ratio_;
    return (1.0 - r) * std::pow(r, static_cast<double>(level));
  }
  if (level >= probs_.size()) return 0.0;
  return probs_[level];
}

std::uint64_t LevelPmf::sample(RngStream& stream) const {
  const double u = stream.uniform();
  if (ratio_) {
    // P(N >= n) = r^n, so N = floor(ln u / ln r).
    const double n = std::floor(std::log(u) / std::log(*ratio_));
    return n <= 0.0 ? 0 : static_cast<std::uint64_t>(n);
  }
  const auto it =
      std::upper_bound(cum_probs_.begin(), cum_probs_.end(), u);
  const std::size_t idx = static_cast<std::size_t>(
      std::min<std::ptrdiff_t>(it - cum_probs_.begin(),
                               static_cast<std::ptrdiff_t>(probs_.size()) - 1));
  return idx;
}

std::optional<std::uint64_t> LevelPmf::max_level() const {
  if (ratio_) return std::nullopt;
  return probs_.size() - 1;
}

std::optional<double> LevelPmf::ratio() const { return ratio_; }

std::uint64_t giles_levels(double epsilon, double alpha, double c1) {
  require(std::isfinite(epsilon) && epsilon > 0.0,
          "giles_levels: epsilon must be > 0");
  require(std::isfinite(alpha) && alpha > 0.0,
          "giles_levels: alpha must be > 0");
  require(std::isfinite(c1) && c1 > 0.0, "giles_levels: c1 must be > 0");
  const double raw = std::log2(2.0 * c1 / epsilon) / alpha;
  if (raw <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(raw));
}

GilesAllocation giles_allocation(double epsilon, const LevelFamily& family,
                                 std::uint64_t max_level) {
  require(std::isfinite(epsilon) && epsilon > 0.0,
          "giles_allocation: epsilon must be > 0");
  GilesAllocation alloc;
  alloc.max_level = max_level;
  alloc.samples_per_level.resize(max_level + 1);
  double cross_sum = 0.0;
  for (std::uint64_t l = 0; l <= max_level; ++l) {
    cross_sum += std::sqrt(static_cast<double>(family.cost_ticks(l)) *
                           family.var_delta(l));
  }
  const double inv_eps2 = 1.0 / (epsilon * epsilon);
  for (std::uint64_t l = 0; l <= max_level; ++l) {
    const double ratio =
        family.var_delta(l) / static_cast<double>(family.cost_ticks(l));
    const double raw =
        (4.0 / 3.0) * inv_eps2 * std::sqrt(ratio) * cross_sum;
    alloc.samples_per_level[l] =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(raw)));
  }
  return alloc;
}

CostedSample giles_estimate(const LevelFamily& family, double epsilon,
                            RngStream& stream) {
  const std::uint64_t max_level =
      giles_levels(epsilon, family.alpha(), family.c1());
  const GilesAllocation alloc = giles_allocation(epsilon, family, max_level);
  CostedSample out;
  for (std::uint64_t l = 0; l <= max_level; ++l) {
    const std::uint64_t n = alloc.samples_per_level[l];
    double level_sum = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const CostedSample s = family.sample_delta(l, stream);
      level_sum += s.value;
      out.cost += s.cost;
    }
    out.value += level_sum / static_cast<double>(n);
  }
  return out;
}

CostedSample naive_parallel_run(const LevelFamily& family, double epsilon,
                                RngStream& stream) {
  const std::uint64_t max_level =
      giles_levels(epsilon, family.alpha(), family.c1());
  CostedSample out;
  for (std::uint64_t l = 0; l <= max_level; ++l) {
    const CostedSample s = family.sample_delta(l, stream);
    out.value += s.value;
    out.cost += s.cost;
  }
  return out;
}

LevelPmf rmlmc_pmf(double beta, double gamma) {
  require(std::isfinite(beta) && beta > 0.0, "rmlmc_pmf: beta must be > 0");
  require(std::isfinite(gamma) && gamma >= 0.0,
          "rmlmc_pmf: gamma must be >= 0");
  require(beta > gamma, "rmlmc_pmf: requires beta > gamma");
  return LevelPmf::geometric(std::exp2(-(beta + gamma) / 2.0));
}

LevelPmf truncated_pmf(double beta, double gamma, std::uint64_t max_level) {
  require(std::isfinite(beta) && beta > 0.0,
          "truncated_pmf: beta must be > 0");
  require(std::isfinite(gamma) && gamma >= 0.0,
          "truncated_pmf: gamma must be >= 0");
  require(beta > gamma, "truncated_pmf: requires beta > gamma");
  std::vector<double> weights(max_level + 1);
  for (std::uint64_t n = 0; n <= max_level; ++n)
    weights[n] = std::exp2(-(beta + gamma) * static_cast<double>(n) / 2.0);
  return LevelPmf::finite(std::move(weights));
}

CostedSample rmlmc_sample(const LevelFamily& family, const LevelPmf& pmf,
                          RngStream& stream) {
  const std::uint64_t level = pmf.sample(stream);
  const double p = pmf.prob(level);
  require(p > 0.0, "rmlmc_sample: sampled level has zero probability");
  const CostedSample draw = family.sample_delta(level, stream);
  return CostedSample{draw.value / p, draw.cost};
}

CostedSample truncated_sample(const LevelFamily& family, const LevelPmf& pmf,
                              RngStream& stream) {
  require(pmf.max_level().has_value(),
          "truncated_sample: needs a finite-support pmf");
  return rmlmc_sample(family, pmf, stream);
}

namespace {

struct VarianceSeries {
  double variance;
  double tail_bound;
};

VarianceSeries variance_series(const LevelFamily& family, const LevelPmf& pmf,
                               std::uint64_t tail_cut) {
  if (pmf.max_level()) {
    const std::uint64_t top = *pmf.max_level();
    double second = 0.0;
    double mean = 0.0;
    for (std::uint64_t n = 0; n <= top; ++n) {
      const double m = family.mean_delta(n);
      second += (family.var_delta(n) + m * m) / pmf.prob(n);
      mean += m;
    }
    return {second - mean * mean, 0.0};
  }

  const double r = *pmf.ratio();
  // Term ratios of the two geometric components of sum (V_n + m_n^2)/p(n).
  const double rho_var = std::exp2(-family.beta()) / r;
  const double rho_mean = std::exp2(-2.0 * family.alpha()) / r;
  if (rho_var >= 1.0 || rho_mean >= 1.0)
    throw DomainError(
        "rmlmc_variance_oracle: series diverges for this pmf/family pair");

  double second = 0.0;
  for (std::uint64_t n = 0; n <= tail_cut; ++n) {
    const double m = family.mean_delta(n);
    second += (family.var_delta(n) + m * m) / pmf.prob(n);
  }
  const double mean_sq_coeff =
      (1.0 - std::exp2(-family.alpha())) * (1.0 - std::exp2(-family.alpha()));
  const double t = static_cast<double>(tail_cut) + 1.0;
  const double tail_var =
      family.c2() * std::pow(rho_var, t) / (1.0 - rho_var);
  const double tail_mean =
      mean_sq_coeff * std::pow(rho_mean, t) / (1.0 - rho_mean);
  const double tail = (tail_var + tail_mean) / (1.0 - r);

  const double truth = family.true_value();
  return {second - truth * truth, tail};
}

}  // namespace

double rmlmc_variance_oracle(const LevelFamily& family, const LevelPmf& pmf,
                             std::uint64_t tail_cut) {
  return variance_series(family, pmf, tail_cut).variance;
}

double rmlmc_variance_tail_bound(const LevelFamily& family,
                                 const LevelPmf& pmf,
                                 std::uint64_t tail_cut) {
  return variance_series(family, pmf, tail_cut).tail_bound;
}

}  // namespace parmc

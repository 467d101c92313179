#ifndef PARMC_MLMC_HPP
#define PARMC_MLMC_HPP

#include <cstdint>
#include <optional>
#include <vector>

#include "parmc/costsim.hpp"
#include "parmc/rng.hpp"

namespace parmc {

// A multilevel problem with closed-form per-level mean/variance/cost:
//   mean_delta(l) = 2^{-alpha l} (1 - 2^{-alpha}),  sum to infinity = 1
//   var_delta(l)  = c2 2^{-beta l}
//   cost_ticks(l) = ceil(c3 2^{gamma l})
// Level draws are Normal(mean_delta(l), var_delta(l)). The implied bias
// constant is c1 = 2^{-alpha}: |partial_mean(l) - 1| = c1 2^{-alpha l}.
class LevelFamily {
 public:
  LevelFamily(double alpha, double beta, double gamma, double c2, double c3);

  double alpha() const { return alpha_; }
  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double c3() const { return c3_; }
  double true_value() const { return 1.0; }

  double mean_delta(std::uint64_t level) const;
  double var_delta(std::uint64_t level) const;
  std::uint64_t cost_ticks(std::uint64_t level) const;

  // Sum of mean_delta over levels 0..L: 1 - 2^{-alpha(L+1)}, exact in
  // binary floating point.
  double partial_mean(std::uint64_t max_level) const;

  CostedSample sample_delta(std::uint64_t level, RngStream& stream) const;

 private:
  double alpha_, beta_, gamma_, c1_, c2_, c3_;
};

LevelFamily synthetic_family(double alpha, double beta, double gamma,
                             double c2, double c3);

// Level distribution for the randomized estimators: either geometric with
// full support (p(n) = (1-r) r^n) or an explicit finite table.
class LevelPmf {
 public:
  static LevelPmf geometric(double ratio);
  static LevelPmf finite(std::vector<double> weights);

  double prob(std::uint64_t level) const;
  std::uint64_t sample(RngStream& stream) const;

  // Largest supported level; nullopt for full (geometric) support.
  std::optional<std::uint64_t> max_level() const;

  // Geometric ratio when applicable.
  std::optional<double> ratio() const;

 private:
  LevelPmf() = default;
  std::optional<double> ratio_;
  std::vector<double> probs_;      // finite case
  std::vector<double> cum_probs_;  // finite case
};

// Deepest level L = ceil(log2(2 c1 / epsilon) / alpha), clamped at 0,
// making the partial-sum bias at most epsilon/2.
std::uint64_t giles_levels(double epsilon, double alpha, double c1);

struct GilesAllocation {
  std::uint64_t max_level = 0;
  std::vector<std::uint64_t> samples_per_level;  // length max_level + 1
};

// N_l = ceil((4/3) eps^-2 sqrt(V_l / C_l) sum_k sqrt(C_k V_k)), min 1,
// which keeps the combined-variance budget at 0.75 eps^2.
GilesAllocation giles_allocation(double epsilon, const LevelFamily& family,
                                 std::uint64_t max_level);

// Full multilevel estimator: per-level sample means with the allocation
// above. MSE <= epsilon^2 by construction.
CostedSample giles_estimate(const LevelFamily& family, double epsilon,
                            RngStream& stream);

// One draw per level up to L: deterministic cost, O(1) variance, bias
// <= epsilon/2. The per-processor workload of the naive parallel variant.
CostedSample naive_parallel_run(const LevelFamily& family, double epsilon,
                                RngStream& stream);

// Geometric level pmf with ratio 2^{-(beta+gamma)/2}; requires beta > gamma.
LevelPmf rmlmc_pmf(double beta, double gamma);

// Same weights restricted to {0..L} and renormalized.
LevelPmf truncated_pmf(double beta, double gamma, std::uint64_t max_level);

// Single-term importance-weighted estimator: draws N ~ pmf and returns
// Delta_N / p(N) with the level's tick cost. Unbiased for the family mean
// when the pmf has full support.
CostedSample rmlmc_sample(const LevelFamily& family, const LevelPmf& pmf,
                          RngStream& stream);

// rmlmc_sample with a finite-support pmf; expectation is partial_mean(L).
CostedSample truncated_sample(const LevelFamily& family, const LevelPmf& pmf,
                              RngStream& stream);

// Series evaluation of Var(Delta_N / p(N)):
//   sum_n (var_delta(n) + mean_delta(n)^2) / p(n) - (sum_n mean_delta(n))^2
// truncated at tail_cut for full-support pmfs. Throws if the series
// diverges.
double rmlmc_variance_oracle(const LevelFamily& family, const LevelPmf& pmf,
                             std::uint64_t tail_cut);

// Upper bound on the series mass dropped beyond tail_cut (0 for finite
// pmfs).
double rmlmc_variance_tail_bound(const LevelFamily& family,
                                 const LevelPmf& pmf, std::uint64_t tail_cut);

}  // namespace parmc

#endif

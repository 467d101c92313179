#ifndef PARMC_COSTSIM_HPP
#define PARMC_COSTSIM_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parmc/rng.hpp"

namespace parmc {

// One estimator replication: its output and its virtual-time price in ticks.
struct CostedSample {
  double value = 0.0;
  std::uint64_t cost = 0;
};

// A replication source. Must produce i.i.d. samples given independent
// streams; all randomness must come from the supplied stream.
using Sampler = std::function<CostedSample(RngStream&)>;

// Processor allocation: m_eps processors, n_eps replications on each.
struct FarmPlan {
  std::uint64_t m_eps = 1;
  std::uint64_t n_eps = 1;
};

// Unlimited processor supply.
inline constexpr std::optional<std::uint64_t> kUnbounded = std::nullopt;

// Allocation for an unbiased sampler with variance <= variance_bound so the
// averaged estimate has variance <= epsilon^2:
//   m = min(available, ceil(v / eps^2)),  n = ceil(v / eps^2 / m).
FarmPlan plan_unbiased(double variance_bound, double epsilon,
                       std::optional<std::uint64_t> available_processors =
                           kUnbounded);

// Allocation for a sampler whose bias is already <= epsilon/2, leaving a
// variance budget of 0.75 * epsilon^2:
//   m = min(available, ceil(v / (0.75 eps^2))),  n = ceil(.../m).
FarmPlan plan_biased(double variance_bound, double epsilon,
                     std::optional<std::uint64_t> available_processors =
                         kUnbounded);

// Every cost and value recorded by a farm run, per processor.
struct FarmLedger {
  std::vector<std::vector<std::uint64_t>> per_processor_costs;
  std::vector<std::vector<double>> per_processor_values;
  std::uint64_t seed = 0;

  std::uint64_t m_eps() const { return per_processor_costs.size(); }
};

// Executes the plan. Replication (i, j) draws from a stream keyed by
// (seed, i, j), so the ledger is bit-identical for identical (plan, seed)
// no matter how many real threads run it. threads == 0 picks the default.
FarmLedger run_farm(const FarmPlan& plan, const Sampler& sampler,
                    std::uint64_t seed, unsigned threads = 0);

// Completion-time summary: total = L1 norm of per-processor sums,
// worst_case = Linf norm, average = total / m.
struct FarmMetrics {
  std::uint64_t total_cost = 0;
  std::uint64_t worst_case = 0;
  double average = 0.0;
};

FarmMetrics metrics(const FarmLedger& ledger);

// Grand mean of all recorded values.
double aggregate(const FarmLedger& ledger);

// Mean of (estimate - truth)^2 over a non-empty list of estimates.
double empirical_mse(std::span<const double> estimates, double truth);

// CSV with header processor,replication,cost_ticks,value.
std::string ledger_csv(const FarmLedger& ledger);

// CSV with header total_cost,worst_case,average,m_eps,n_eps,seed.
std::string metrics_csv(const FarmMetrics& m, const FarmPlan& plan,
                        std::uint64_t seed);

}  // namespace parmc

#endif

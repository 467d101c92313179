#include "parmc/costsim.hpp"

#include <cmath>
#include <limits>

#include "parmc/csv.hpp"
#include "parmc/errors.hpp"
#include "parmc/parallel.hpp"

namespace parmc {

namespace {

// Ceiling of a positive double budget as an integer count. The budget is
// computed in double precision; exact integers are not rounded up.
std::uint64_t ceil_budget(double budget, const char* what) {
  if (!std::isfinite(budget) || budget <= 0.0)
    throw DomainError(std::string(what) + ": budget must be finite and > 0");
  if (budget >= 9.0e18)
    throw DomainError(std::string(what) + ": budget overflows tick counter");
  const double c = std::ceil(budget);
  return static_cast<std::uint64_t>(c);
}

FarmPlan plan_from_budget(double budget,
                          std::optional<std::uint64_t> available,
                          const char* what) {
  if (available && *available == 0)
    throw DomainError(std::string(what) + ": need at least one processor");
  const std::uint64_t required = ceil_budget(budget, what);
  FarmPlan plan;
  plan.m_eps = available ? std::min(*available, required) : required;
  plan.n_eps = ceil_budget(budget / static_cast<double>(plan.m_eps), what);
  return plan;
}

void check_plan_inputs(double variance_bound, double epsilon,
                       const char* what) {
  if (!std::isfinite(variance_bound) || variance_bound <= 0.0)
    throw DomainError(std::string(what) + ": variance bound must be > 0");
  if (!std::isfinite(epsilon) || epsilon <= 0.0)
    throw DomainError(std::string(what) + ": epsilon must be > 0");
}

}  // namespace

FarmPlan plan_unbiased(double variance_bound, double epsilon,
                       std::optional<std::uint64_t> available_processors) {
  check_plan_inputs(variance_bound, epsilon, "plan_unbiased");
  const double budget = variance_bound / (epsilon * epsilon);
  return plan_from_budget(budget, available_processors, "plan_unbiased");
}

FarmPlan plan_biased(double variance_bound, double epsilon,
                     std::optional<std::uint64_t> available_processors) {
  check_plan_inputs(variance_bound, epsilon, "plan_biased");
  const double budget = variance_bound / (0.75 * epsilon * epsilon);
  return plan_from_budget(budget, available_processors, "plan_biased");
}

FarmLedger run_farm(const FarmPlan& plan, const Sampler& sampler,
                    std::uint64_t seed, unsigned threads) {
  if (plan.m_eps == 0 || plan.n_eps == 0)
    throw DomainError("run_farm: plan must have m_eps, n_eps >= 1");
  if (plan.m_eps > std::numeric_limits<std::uint32_t>::max() ||
      plan.n_eps > std::numeric_limits<std::uint32_t>::max())
    throw DomainError("run_farm: plan exceeds the 2^32 lane space");

  FarmLedger ledger;
  ledger.seed = seed;
  ledger.per_processor_costs.resize(plan.m_eps);
  ledger.per_processor_values.resize(plan.m_eps);

  parallel_for(plan.m_eps, [&](std::size_t i) {
    auto& costs = ledger.per_processor_costs[i];
    auto& values = ledger.per_processor_values[i];
    costs.resize(plan.n_eps);
    values.resize(plan.n_eps);
    for (std::uint64_t j = 0; j < plan.n_eps; ++j) {
      RngStream stream(seed, lane_of(static_cast<std::uint32_t>(i),
                                     static_cast<std::uint32_t>(j)));
      CostedSample s;
      try {
        s = sampler(stream);
      } catch (const std::exception& e) {
        throw FarmError(
            "run_farm: sampler failed at processor " + format_u64(i) +
                ", replication " + format_u64(j) + ": " + e.what(),
            i, j);
      }
      if (!std::isfinite(s.value))
        throw FarmError("run_farm: non-finite value at processor " +
                            format_u64(i) + ", replication " + format_u64(j),
                        i, j);
      costs[j] = s.cost;
      values[j] = s.value;
    }
  }, threads);
  return ledger;
}

FarmMetrics metrics(const FarmLedger& ledger) {
  if (ledger.m_eps() == 0) throw DomainError("metrics: empty ledger");
  FarmMetrics m;
  for (const auto& row : ledger.per_processor_costs) {
    std::uint64_t row_sum = 0;
    for (std::uint64_t c : row) row_sum += c;
    m.total_cost += row_sum;
    m.worst_case = std::max(m.worst_case, row_sum);
  }
  m.average = static_cast<double>(m.total_cost) /
              static_cast<double>(ledger.m_eps());
  return m;
}

double aggregate(const FarmLedger& ledger) {
  if (ledger.m_eps() == 0) throw DomainError("aggregate: empty ledger");
  double sum = 0.0;
  std::uint64_t count = 0;
  for (const auto& row : ledger.per_processor_values) {
    for (double v : row) sum += v;
    count += row.size();
  }
  if (count == 0) throw DomainError("aggregate: ledger has no values");
  return sum / static_cast<double>(count);
}

double empirical_mse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw DomainError("empirical_mse: empty list");
  double s = 0.0;
  for (double e : estimates) s += (e - truth) * (e - truth);
  return s / static_cast<double>(estimates.size());
}

std::string ledger_csv(const FarmLedger& ledger) {
  std::string out = "processor,replication,cost_ticks,value\n";
  for (std::size_t i = 0; i < ledger.m_eps(); ++i) {
    const auto& costs = ledger.per_processor_costs[i];
    const auto& values = ledger.per_processor_values[i];
    for (std::size_t j = 0; j < costs.size(); ++j) {
      append_row(out, {format_u64(i), format_u64(j), format_u64(costs[j]),
                       format_double(values[j])});
    }
  }
  return out;
}

std::string metrics_csv(const FarmMetrics& m, const FarmPlan& plan,
                        std::uint64_t seed) {
  std::string out = "total_cost,worst_case,average,m_eps,n_eps,seed\n";
  append_row(out, {format_u64(m.total_cost), format_u64(m.worst_case),
                   format_double(m.average), format_u64(plan.m_eps),
                   format_u64(plan.n_eps), format_u64(seed)});
  return out;
}

}  // namespace parmc

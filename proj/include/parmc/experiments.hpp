#ifndef PARMC_EXPERIMENTS_HPP
#define PARMC_EXPERIMENTS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "parmc/costsim.hpp"
#include "parmc/stats.hpp"

namespace parmc {

using FitResult = LinearFit;

// Flat scenario configuration; every field has a default so each scenario
// runs with nothing but a seed.
struct ExperimentConfig {
  std::string scenario = "mcmc-case-study";
  std::uint64_t seed = 1;
  std::uint64_t repetitions = 100;
  std::string output_dir = "out";
  unsigned threads = 0;  // 0: PARMC_THREADS or hardware default

  // mcmc-case-study
  double sigma = 2.38;
  std::uint64_t lag_k = 0;
  std::vector<std::uint64_t> m_grid = {1,    3,    10,    31,    100,  316,
                                       1000, 3162, 10000, 31623, 100000};
  std::vector<std::uint64_t> n_grid = {10, 20, 30, 50, 100};
  std::uint64_t max_joint_steps = 1000000;

  // mlmc-sweep. The worst-case completion of the randomized estimator is
  // heavy-tailed (tail index (beta+gamma)/(2 gamma)), so its per-point
  // average needs many farm repetitions before the fitted slope settles.
  std::vector<double> eps_grid = {0.025, 0.05, 0.1, 0.2};
  double alpha = 1.0;
  double beta = 2.0;
  double gamma = 1.0;
  double c2 = 1.0;
  double c3 = 1.0;
  std::uint64_t farm_reps = 10000;
  std::uint64_t oracle_tail_cut = 200;

  // tail-bench
  std::vector<std::uint64_t> tail_n_grid = {1, 10, 100, 1000};
  std::uint64_t tail_reps = 10000;

  // farm-demo
  double demo_variance_bound = 2.0;
  double demo_epsilon = 0.25;
  std::uint64_t demo_processors = 0;  // 0: unbounded
};

ExperimentConfig default_config(const std::string& scenario);

// Parses a flat JSON object and merges it over the defaults. Unknown keys,
// type mismatches and invariant violations raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);

void validate_config(const ExperimentConfig& config);

struct CaseStudyResult {
  std::vector<std::uint64_t> m_grid;
  std::vector<std::uint64_t> n_grid;

  // Averages over macro-repetitions, indexed by the m grid.
  std::vector<double> completion;  // worst cost among the first M runs
  std::vector<double> err2;        // squared error of the M-run mean
  std::vector<std::vector<double>> std_err2;  // [n_idx][m_idx]

  // Per macro-repetition values behind the averages.
  std::vector<std::vector<double>> rep_completion;            // [rep][m_idx]
  std::vector<std::vector<double>> rep_err2;                  // [rep][m_idx]
  std::vector<std::vector<std::vector<double>>> rep_std_err2;  // [rep][n][m]
  // Signed per-repetition estimator means (support pooled diagnostics).
  std::vector<std::vector<double>> rep_mean;                   // [rep][m_idx]
  std::vector<std::vector<std::vector<double>>> rep_std_mean;  // [rep][n][m]

  FitResult err2_loglog;       // ln err2 vs ln M
  FitResult completion_logfit;  // T vs ln M

  std::vector<std::uint64_t> tau_values;
  std::vector<std::uint64_t> tau_counts;
};

CaseStudyResult run_mcmc_case_study(const ExperimentConfig& config);

struct MlmcSweepResult {
  std::vector<std::string> estimators;
  std::vector<double> eps_grid;

  // [estimator][eps_idx], averaged over farm repetitions.
  std::vector<std::vector<double>> total_cost;
  std::vector<std::vector<double>> worst_case;
  std::vector<std::vector<double>> average;
  std::vector<std::vector<double>> mse;

  // ln(metric) vs ln(1/eps) per estimator.
  std::vector<FitResult> total_cost_fit;
  std::vector<FitResult> worst_case_fit;

  // Truncated-estimator bias identity per eps: L and |s_L - 1|.
  std::vector<std::uint64_t> trunc_levels;
  std::vector<double> trunc_bias;
};

MlmcSweepResult run_mlmc_sweep(const ExperimentConfig& config);

struct TailBenchRow {
  std::string distribution;
  std::uint64_t n = 0;
  double empirical_mean = 0.0;
  std::optional<double> mean_bound;
  std::array<double, 3> empirical_q{};          // q = 0.25, 0.5, 0.75
  std::array<std::optional<double>, 3> evt_q{};
};

struct TailBenchResult {
  std::vector<TailBenchRow> rows;
};

TailBenchResult run_tail_bench(const ExperimentConfig& config);

struct FarmDemoResult {
  FarmPlan plan;
  FarmMetrics farm_metrics;
  double estimate = 0.0;
};

FarmDemoResult run_farm_demo(const ExperimentConfig& config);

// Runs the configured scenario, writes its artifacts, and optionally
// evaluates the scenario's assertion set. Returns human-readable check
// lines and the overall verdict (true when no check failed).
struct ScenarioOutcome {
  bool checks_passed = true;
  std::vector<std::string> check_lines;
};

ScenarioOutcome run_scenario(const ExperimentConfig& config, bool check);

}  // namespace parmc

#endif

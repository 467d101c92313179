#include "parmc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include <json.hpp>

#include "parmc/csv.hpp"
#include "parmc/errors.hpp"
#include "parmc/mcmc.hpp"
#include "parmc/mlmc.hpp"
#include "parmc/parallel.hpp"
#include "parmc/svg.hpp"
#include "parmc/tails.hpp"

namespace parmc {

namespace {

// Lane layout: high word = (tag << 24) | macro-rep, low word = item index.
constexpr std::uint32_t kLaneCaseUnbiased = 1;
constexpr std::uint32_t kLaneCaseStandard = 2;
constexpr std::uint32_t kLaneMlmcFarm = 3;
constexpr std::uint32_t kLaneTailBench = 4;

std::uint64_t scoped_lane(std::uint32_t tag, std::uint32_t scope,
                          std::uint32_t item) {
  return lane_of((tag << 24) | scope, item);
}

// Distinct farm seeds per (estimator, eps, repetition) cell.
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t tag,
                          std::uint32_t scope, std::uint32_t item) {
  RngStream s(seed, scoped_lane(tag, scope, item));
  return s.next_u64();
}

void require_config(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

template <typename T>
void require_sorted_grid(const std::vector<T>& grid, const char* name) {
  require_config(!grid.empty(), std::string(name) + " must be non-empty");
  for (std::size_t i = 1; i < grid.size(); ++i)
    require_config(grid[i - 1] < grid[i],
                   std::string(name) + " must be sorted ascending");
  require_config(grid.size() < 250, std::string(name) + " is too long");
}

std::filesystem::path ensure_output_dir(const ExperimentConfig& config) {
  std::filesystem::path dir(config.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

struct CheckList {
  bool passed = true;
  std::vector<std::string> lines;

  void add(bool ok, const std::string& text) {
    lines.push_back(std::string(ok ? "[PASS] " : "[FAIL] ") + text);
    passed = passed && ok;
  }
  void note(const std::string& text) { lines.push_back("[INFO] " + text); }
};

}  // namespace

ExperimentConfig default_config(const std::string& scenario) {
  ExperimentConfig config;
  config.scenario = scenario;
  validate_config(config);
  return config;
}

void validate_config(const ExperimentConfig& config) {
  require_config(config.scenario == "mcmc-case-study" ||
                     config.scenario == "mlmc-sweep" ||
                     config.scenario == "tail-bench" ||
                     config.scenario == "farm-demo",
                 "unknown scenario: " + config.scenario);
  require_config(config.repetitions >= 1, "repetitions must be >= 1");
  require_config(!config.output_dir.empty(), "output_dir must be non-empty");
  require_config(config.repetitions < (1u << 24),
                 "repetitions exceed the lane space");

  require_sorted_grid(config.m_grid, "m_grid");
  require_sorted_grid(config.n_grid, "n_grid");
  require_config(config.m_grid.front() >= 1, "m_grid entries must be >= 1");
  require_config(config.n_grid.front() >= 1, "n_grid entries must be >= 1");
  require_config(std::isfinite(config.sigma) && config.sigma > 0.0,
                 "sigma must be > 0");
  require_config(config.max_joint_steps >= 1,
                 "max_joint_steps must be >= 1");

  require_sorted_grid(config.eps_grid, "eps_grid");
  require_config(config.eps_grid.size() >= 3,
                 "eps_grid needs at least 3 points for the scaling fits");
  for (double e : config.eps_grid)
    require_config(std::isfinite(e) && e > 0.0,
                   "eps_grid entries must be > 0");
  require_config(config.farm_reps >= 2, "farm_reps must be >= 2");
  // Level family constraints; mirrors the library-side validation.
  require_config(config.alpha > 0.0 && config.beta > 0.0 &&
                     config.gamma >= 0.0,
                 "family parameters must be positive (gamma >= 0)");
  require_config(config.beta > config.gamma, "family requires beta > gamma");
  require_config(config.alpha >= std::max(config.beta, config.gamma) / 2.0,
                 "family requires alpha >= max(beta, gamma)/2");
  require_config(config.c2 >= 0.0 && config.c3 > 0.0,
                 "family requires c2 >= 0 and c3 > 0");

  require_sorted_grid(config.tail_n_grid, "tail_n_grid");
  require_config(config.tail_n_grid.front() >= 1,
                 "tail_n_grid entries must be >= 1");
  require_config(config.tail_reps >= 2, "tail_reps must be >= 2");

  require_config(std::isfinite(config.demo_variance_bound) &&
                     config.demo_variance_bound > 0.0,
                 "demo_variance_bound must be > 0");
  require_config(std::isfinite(config.demo_epsilon) &&
                     config.demo_epsilon > 0.0,
                 "demo_epsilon must be > 0");
}

ExperimentConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_config(j.is_object(), "config must be a JSON object");

  ExperimentConfig config;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "scenario") config.scenario = value.get<std::string>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "repetitions")
        config.repetitions = value.get<std::uint64_t>();
      else if (key == "output_dir")
        config.output_dir = value.get<std::string>();
      else if (key == "threads") config.threads = value.get<unsigned>();
      else if (key == "sigma") config.sigma = value.get<double>();
      else if (key == "lag_k") config.lag_k = value.get<std::uint64_t>();
      else if (key == "m_grid")
        config.m_grid = value.get<std::vector<std::uint64_t>>();
      else if (key == "n_grid")
        config.n_grid = value.get<std::vector<std::uint64_t>>();
      else if (key == "max_joint_steps")
        config.max_joint_steps = value.get<std::uint64_t>();
      else if (key == "eps_grid")
        config.eps_grid = value.get<std::vector<double>>();
      else if (key == "alpha") config.alpha = value.get<double>();
      else if (key == "beta") config.beta = value.get<double>();
      else if (key == "gamma") config.gamma = value.get<double>();
      else if (key == "c2") config.c2 = value.get<double>();
      else if (key == "c3") config.c3 = value.get<double>();
      else if (key == "farm_reps")
        config.farm_reps = value.get<std::uint64_t>();
      else if (key == "oracle_tail_cut")
        config.oracle_tail_cut = value.get<std::uint64_t>();
      else if (key == "tail_n_grid")
        config.tail_n_grid = value.get<std::vector<std::uint64_t>>();
      else if (key == "tail_reps")
        config.tail_reps = value.get<std::uint64_t>();
      else if (key == "demo_variance_bound")
        config.demo_variance_bound = value.get<double>();
      else if (key == "demo_epsilon")
        config.demo_epsilon = value.get<double>();
      else if (key == "demo_processors")
        config.demo_processors = value.get<std::uint64_t>();
      else
        throw ConfigError("unknown config key: " + key);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  validate_config(config);
  return config;
}

// ---------------------------------------------------------------------------
// mcmc-case-study
// ---------------------------------------------------------------------------

namespace {

struct CaseStudyRep {
  std::vector<double> completion;           // [m_idx]
  std::vector<double> err2;                 // [m_idx]
  std::vector<double> mean;                 // [m_idx], signed
  std::vector<std::vector<double>> std_err2;  // [n_idx][m_idx]
  std::vector<std::vector<double>> std_mean;  // [n_idx][m_idx]
  std::map<std::uint64_t, std::uint64_t> tau_hist;
  // kept only for rep 0, feeds runs.csv
  std::vector<CouplingRun> runs;
};

CaseStudyRep case_study_rep(const ExperimentConfig& config,
                            const Target& target, std::uint32_t rep) {
  const auto& m_grid = config.m_grid;
  const auto& n_grid = config.n_grid;
  const std::uint64_t m_max = m_grid.back();
  const std::uint64_t n_max = n_grid.back();
  const auto f = [](double x) { return x; };
  UnbiasedRunOptions opts;
  opts.max_joint_steps = config.max_joint_steps;

  CaseStudyRep out;
  out.completion.resize(m_grid.size());
  out.err2.resize(m_grid.size());
  out.mean.resize(m_grid.size());
  out.std_err2.assign(n_grid.size(),
                      std::vector<double>(m_grid.size(), 0.0));
  out.std_mean.assign(n_grid.size(),
                      std::vector<double>(m_grid.size(), 0.0));
  if (rep == 0) out.runs.reserve(m_max);

  // Unbiased runs; prefix statistics at every grid checkpoint.
  {
    double sum = 0.0;
    std::uint64_t worst = 0;
    std::size_t m_idx = 0;
    for (std::uint64_t j = 0; j < m_max; ++j) {
      RngStream stream(config.seed,
                       scoped_lane(kLaneCaseUnbiased, rep,
                                   static_cast<std::uint32_t>(j)));
      const CouplingRun run =
          unbiased_mcmc_run(target, f, config.lag_k, config.sigma, stream,
                            opts);
      sum += run.h_k;
      worst = std::max(worst, run.cost);
      ++out.tau_hist[run.tau];
      if (rep == 0) out.runs.push_back(run);
      if (m_idx < m_grid.size() && j + 1 == m_grid[m_idx]) {
        const double mean = sum / static_cast<double>(j + 1);
        out.completion[m_idx] = static_cast<double>(worst);
        out.err2[m_idx] = mean * mean;  // target mean is 0
        out.mean[m_idx] = mean;
        ++m_idx;
      }
    }
  }

  // Standard chains, one per replication, read at every n checkpoint.
  {
    std::vector<double> run_sums(n_grid.size(), 0.0);
    std::size_t m_idx = 0;
    for (std::uint64_t j = 0; j < m_max; ++j) {
      RngStream stream(config.seed,
                       scoped_lane(kLaneCaseStandard, rep,
                                   static_cast<std::uint32_t>(j)));
      double x = target.initial_sampler(stream);
      double lp = target.log_density(x);
      double f_sum = 0.0;
      std::size_t n_idx = 0;
      for (std::uint64_t step = 1; step <= n_max; ++step) {
        const double proposal = x + config.sigma * stream.normal();
        const double lp_p = target.log_density(proposal);
        const double u = stream.uniform();
        if (lp_p - lp >= 0.0 || std::log(u) < lp_p - lp) {
          x = proposal;
          lp = lp_p;
        }
        f_sum += x;
        if (step == n_grid[n_idx]) {
          run_sums[n_idx] += f_sum / static_cast<double>(step);
          ++n_idx;
        }
      }
      if (m_idx < m_grid.size() && j + 1 == m_grid[m_idx]) {
        for (std::size_t n = 0; n < n_grid.size(); ++n) {
          const double mean = run_sums[n] / static_cast<double>(j + 1);
          out.std_err2[n][m_idx] = mean * mean;
          out.std_mean[n][m_idx] = mean;
        }
        ++m_idx;
      }
    }
  }
  return out;
}

void write_case_study_outputs(const ExperimentConfig& config,
                              const CaseStudyResult& result,
                              const std::vector<CouplingRun>& rep0_runs) {
  const auto dir = ensure_output_dir(config);
  const auto& m_grid = result.m_grid;
  const auto& n_grid = result.n_grid;

  std::string fig1 = "M,T,err2\n";
  for (std::size_t i = 0; i < m_grid.size(); ++i)
    append_row(fig1, {format_u64(m_grid[i]), format_double(result.completion[i]),
                      format_double(result.err2[i])});
  write_text_file((dir / "fig1.csv").string(), fig1);

  std::string fig1_raw = "rep,M,T,err2\n";
  for (std::size_t r = 0; r < result.rep_err2.size(); ++r)
    for (std::size_t i = 0; i < m_grid.size(); ++i)
      append_row(fig1_raw,
                 {format_u64(r), format_u64(m_grid[i]),
                  format_double(result.rep_completion[r][i]),
                  format_double(result.rep_err2[r][i])});
  write_text_file((dir / "fig1_raw.csv").string(), fig1_raw);

  std::string fig2 = "method,N,M,err2,completion\n";
  for (std::size_t i = 0; i < m_grid.size(); ++i)
    append_row(fig2, {"unbiased-mcmc", "0", format_u64(m_grid[i]),
                      format_double(result.err2[i]),
                      format_double(result.completion[i])});
  for (std::size_t n = 0; n < n_grid.size(); ++n)
    for (std::size_t i = 0; i < m_grid.size(); ++i)
      append_row(fig2, {"standard-mcmc", format_u64(n_grid[n]),
                        format_u64(m_grid[i]),
                        format_double(result.std_err2[n][i]),
                        format_u64(n_grid[n])});
  write_text_file((dir / "fig2.csv").string(), fig2);

  std::string fig2_raw = "rep,method,N,M,err2\n";
  for (std::size_t r = 0; r < result.rep_err2.size(); ++r) {
    for (std::size_t i = 0; i < m_grid.size(); ++i)
      append_row(fig2_raw, {format_u64(r), "unbiased-mcmc", "0",
                            format_u64(m_grid[i]),
                            format_double(result.rep_err2[r][i])});
    for (std::size_t n = 0; n < n_grid.size(); ++n)
      for (std::size_t i = 0; i < m_grid.size(); ++i)
        append_row(fig2_raw, {format_u64(r), "standard-mcmc",
                              format_u64(n_grid[n]), format_u64(m_grid[i]),
                              format_double(result.rep_std_err2[r][n][i])});
  }
  write_text_file((dir / "fig2_raw.csv").string(), fig2_raw);

  std::string fits = "name,slope,intercept,r_squared\n";
  append_row(fits, {"err2_vs_m_loglog", format_double(result.err2_loglog.slope),
                    format_double(result.err2_loglog.intercept),
                    format_double(result.err2_loglog.r_squared)});
  append_row(fits,
             {"completion_vs_logm", format_double(result.completion_logfit.slope),
              format_double(result.completion_logfit.intercept),
              format_double(result.completion_logfit.r_squared)});
  write_text_file((dir / "fits.csv").string(), fits);

  std::string taus = "tau,count\n";
  for (std::size_t i = 0; i < result.tau_values.size(); ++i)
    append_row(taus, {format_u64(result.tau_values[i]),
                      format_u64(result.tau_counts[i])});
  write_text_file((dir / "tau_hist.csv").string(), taus);

  std::string runs = "method,n_or_tau,value,cost_ticks\n";
  for (const auto& run : rep0_runs)
    append_row(runs, {"unbiased-mcmc", format_u64(run.tau),
                      format_double(run.h_k), format_u64(run.cost)});
  write_text_file((dir / "runs.csv").string(), runs);

  // Figure panels.
  std::vector<double> m_real(m_grid.begin(), m_grid.end());
  Series t_series{"completion", m_real, result.completion};
  Series e_series{"unbiased", m_real, result.err2};

  AxesSpec a;
  a.title = "completion time vs processors";
  a.x_label = "M";
  a.y_label = "T(M)";
  a.x_log = true;
  emit_svg_plot(std::vector<Series>{t_series}, a,
                (dir / "fig1_a.svg").string());

  AxesSpec b;
  b.title = "squared error vs completion time";
  b.x_label = "T(M)";
  b.y_label = "err^2";
  b.y_log = true;
  emit_svg_plot(std::vector<Series>{Series{"unbiased", result.completion,
                                           result.err2}},
                b, (dir / "fig1_b.svg").string());

  AxesSpec c;
  c.title = "squared error vs processors";
  c.x_label = "M";
  c.y_label = "err^2";
  c.x_log = true;
  c.y_log = true;
  emit_svg_plot(std::vector<Series>{e_series}, c,
                (dir / "fig1_c.svg").string());

  AxesSpec d = c;
  d.title = "squared error vs processors with fit";
  std::vector<Series> d_series{e_series};
  {
    Series fit_line;
    fit_line.name = "fit";
    fit_line.xs = {m_real.front(), m_real.back()};
    for (double x : fit_line.xs)
      fit_line.ys.push_back(std::exp(result.err2_loglog.intercept +
                                     result.err2_loglog.slope * std::log(x)));
    d_series.push_back(fit_line);
  }
  emit_svg_plot(d_series, d, (dir / "fig1_d.svg").string());

  std::vector<Series> comparison{e_series};
  for (std::size_t n = 0; n < n_grid.size(); ++n)
    comparison.push_back(Series{"standard N=" + format_u64(n_grid[n]), m_real,
                                result.std_err2[n]});
  AxesSpec f2a = c;
  f2a.title = "unbiased vs standard";
  emit_svg_plot(comparison, f2a, (dir / "fig2_a.svg").string());

  // error against completion budget at the largest M
  Series std_vs_time{"standard-mcmc", {}, {}};
  for (std::size_t n = 0; n < n_grid.size(); ++n) {
    std_vs_time.xs.push_back(static_cast<double>(n_grid[n]));
    std_vs_time.ys.push_back(result.std_err2[n].back());
  }
  Series unb_vs_time{"unbiased-mcmc", result.completion, result.err2};
  AxesSpec f2b;
  f2b.title = "squared error vs completion time";
  f2b.x_label = "completion";
  f2b.y_label = "err^2";
  f2b.y_log = true;
  emit_svg_plot(std::vector<Series>{std_vs_time, unb_vs_time}, f2b,
                (dir / "fig2_b.svg").string());
  AxesSpec f2c = f2b;
  f2c.x_log = true;
  f2c.title = "squared error vs completion time (log-log)";
  emit_svg_plot(std::vector<Series>{std_vs_time, unb_vs_time}, f2c,
                (dir / "fig2_c.svg").string());
}

}  // namespace

CaseStudyResult run_mcmc_case_study(const ExperimentConfig& config) {
  validate_config(config);
  require_config(config.scenario == "mcmc-case-study",
                 "run_mcmc_case_study: wrong scenario");
  require_config(config.m_grid.back() < (1ull << 32),
                 "m_grid exceeds the lane space");

  const Target target = standard_normal_target(0.0, 1.0, 1.0);
  const std::size_t reps = config.repetitions;

  std::vector<CaseStudyRep> per_rep(reps);
  parallel_for(reps, [&](std::size_t r) {
    per_rep[r] = case_study_rep(config, target,
                                static_cast<std::uint32_t>(r));
  }, config.threads);

  CaseStudyResult result;
  result.m_grid = config.m_grid;
  result.n_grid = config.n_grid;
  const std::size_t n_m = config.m_grid.size();
  const std::size_t n_n = config.n_grid.size();

  result.completion.assign(n_m, 0.0);
  result.err2.assign(n_m, 0.0);
  result.std_err2.assign(n_n, std::vector<double>(n_m, 0.0));
  result.rep_completion.resize(reps);
  result.rep_err2.resize(reps);
  result.rep_std_err2.resize(reps);
  result.rep_mean.resize(reps);
  result.rep_std_mean.resize(reps);

  std::map<std::uint64_t, std::uint64_t> tau_hist;
  for (std::size_t r = 0; r < reps; ++r) {
    auto& rep = per_rep[r];
    result.rep_completion[r] = rep.completion;
    result.rep_err2[r] = rep.err2;
    result.rep_std_err2[r] = rep.std_err2;
    result.rep_mean[r] = rep.mean;
    result.rep_std_mean[r] = rep.std_mean;
    for (std::size_t i = 0; i < n_m; ++i) {
      result.completion[i] += rep.completion[i];
      result.err2[i] += rep.err2[i];
    }
    for (std::size_t n = 0; n < n_n; ++n)
      for (std::size_t i = 0; i < n_m; ++i)
        result.std_err2[n][i] += rep.std_err2[n][i];
    for (const auto& [tau, count] : rep.tau_hist) tau_hist[tau] += count;
  }
  const double inv_reps = 1.0 / static_cast<double>(reps);
  for (std::size_t i = 0; i < n_m; ++i) {
    result.completion[i] *= inv_reps;
    result.err2[i] *= inv_reps;
  }
  for (auto& row : result.std_err2)
    for (double& v : row) v *= inv_reps;
  for (const auto& [tau, count] : tau_hist) {
    result.tau_values.push_back(tau);
    result.tau_counts.push_back(count);
  }

  std::vector<double> m_real(config.m_grid.begin(), config.m_grid.end());
  result.err2_loglog = fit_loglog(m_real, result.err2);
  std::vector<double> log_m(m_real.size());
  for (std::size_t i = 0; i < m_real.size(); ++i)
    log_m[i] = std::log(m_real[i]);
  result.completion_logfit = linear_fit(log_m, result.completion);

  write_case_study_outputs(config, result, per_rep[0].runs);
  return result;
}

// ---------------------------------------------------------------------------
// mlmc-sweep
// ---------------------------------------------------------------------------

namespace {

struct FarmPoint {
  double total = 0.0;
  double worst = 0.0;
  double average = 0.0;
  double mse = 0.0;
  FarmLedger rep0_ledger;
};

FarmPoint sweep_point(const FarmPlan& plan, const Sampler& sampler,
                      double truth, const ExperimentConfig& config,
                      std::uint32_t est_idx, std::uint32_t eps_idx) {
  const std::size_t reps = config.farm_reps;
  std::vector<double> totals(reps), worsts(reps), averages(reps),
      estimates(reps);
  FarmPoint out;
  std::vector<FarmLedger> rep0(1);
  parallel_for(reps, [&](std::size_t r) {
    const std::uint64_t farm_seed = derive_seed(
        config.seed, kLaneMlmcFarm, (est_idx << 8) | eps_idx,
        static_cast<std::uint32_t>(r));
    // Inner farm runs sequentially; the outer loop owns the parallelism.
    const FarmLedger ledger = run_farm(plan, sampler, farm_seed, 1);
    const FarmMetrics m = metrics(ledger);
    totals[r] = static_cast<double>(m.total_cost);
    worsts[r] = static_cast<double>(m.worst_case);
    averages[r] = m.average;
    estimates[r] = aggregate(ledger);
    if (r == 0) rep0[0] = ledger;
  }, config.threads);
  out.total = mean_of(totals);
  out.worst = mean_of(worsts);
  out.average = mean_of(averages);
  out.mse = empirical_mse(estimates, truth);
  out.rep0_ledger = std::move(rep0[0]);
  return out;
}

}  // namespace

MlmcSweepResult run_mlmc_sweep(const ExperimentConfig& config) {
  validate_config(config);
  require_config(config.scenario == "mlmc-sweep",
                 "run_mlmc_sweep: wrong scenario");

  const LevelFamily family = synthetic_family(
      config.alpha, config.beta, config.gamma, config.c2, config.c3);
  const LevelPmf full_pmf = rmlmc_pmf(config.beta, config.gamma);
  const double rmlmc_var =
      rmlmc_variance_oracle(family, full_pmf, config.oracle_tail_cut);

  MlmcSweepResult result;
  result.estimators = {"giles", "naive-parallel", "rmlmc", "truncated-rmlmc"};
  result.eps_grid = config.eps_grid;
  const std::size_t n_est = result.estimators.size();
  const std::size_t n_eps = config.eps_grid.size();
  result.total_cost.assign(n_est, std::vector<double>(n_eps, 0.0));
  result.worst_case.assign(n_est, std::vector<double>(n_eps, 0.0));
  result.average.assign(n_est, std::vector<double>(n_eps, 0.0));
  result.mse.assign(n_est, std::vector<double>(n_eps, 0.0));
  result.trunc_levels.resize(n_eps);
  result.trunc_bias.resize(n_eps);

  std::string runs_csv = "estimator,epsilon,value,cost_ticks\n";

  for (std::size_t e = 0; e < n_eps; ++e) {
    const double eps = config.eps_grid[e];
    const std::uint64_t levels =
        giles_levels(eps, family.alpha(), family.c1());
    result.trunc_levels[e] = levels;
    result.trunc_bias[e] = std::abs(family.partial_mean(levels) - 1.0);

    // Per-level variance sum of the one-draw-per-level estimator.
    double naive_var = 0.0;
    for (std::uint64_t l = 0; l <= levels; ++l)
      naive_var += family.var_delta(l);

    const LevelPmf trunc = truncated_pmf(config.beta, config.gamma, levels);
    const double trunc_var = rmlmc_variance_oracle(family, trunc, 0);

    struct EstimatorSetup {
      FarmPlan plan;
      Sampler sampler;
      double truth;
    };
    std::vector<EstimatorSetup> setups(n_est);
    // Giles runs once on a single processor; its own budget covers the MSE.
    setups[0] = {FarmPlan{1, 1},
                 [&family, eps](RngStream& s) {
                   return giles_estimate(family, eps, s);
                 },
                 family.true_value()};
    setups[1] = {plan_biased(naive_var > 0.0 ? naive_var : 1e-12, eps),
                 [&family, eps](RngStream& s) {
                   return naive_parallel_run(family, eps, s);
                 },
                 family.true_value()};
    setups[2] = {plan_unbiased(rmlmc_var, eps),
                 [&family, &full_pmf](RngStream& s) {
                   return rmlmc_sample(family, full_pmf, s);
                 },
                 family.true_value()};
    setups[3] = {plan_biased(trunc_var, eps),
                 [&family, trunc](RngStream& s) {
                   return truncated_sample(family, trunc, s);
                 },
                 family.true_value()};

    for (std::size_t est = 0; est < n_est; ++est) {
      const FarmPoint point = sweep_point(
          setups[est].plan, setups[est].sampler, setups[est].truth, config,
          static_cast<std::uint32_t>(est), static_cast<std::uint32_t>(e));
      result.total_cost[est][e] = point.total;
      result.worst_case[est][e] = point.worst;
      result.average[est][e] = point.average;
      result.mse[est][e] = point.mse;
      for (std::size_t i = 0; i < point.rep0_ledger.m_eps(); ++i) {
        const auto& costs = point.rep0_ledger.per_processor_costs[i];
        const auto& values = point.rep0_ledger.per_processor_values[i];
        for (std::size_t j = 0; j < costs.size(); ++j)
          append_row(runs_csv,
                     {result.estimators[est], format_double(eps),
                      format_double(values[j]), format_u64(costs[j])});
      }
    }
  }

  std::vector<double> inv_eps(n_eps);
  for (std::size_t e = 0; e < n_eps; ++e) inv_eps[e] = 1.0 / config.eps_grid[e];
  result.total_cost_fit.resize(n_est);
  result.worst_case_fit.resize(n_est);
  for (std::size_t est = 0; est < n_est; ++est) {
    result.total_cost_fit[est] = fit_loglog(inv_eps, result.total_cost[est]);
    result.worst_case_fit[est] = fit_loglog(inv_eps, result.worst_case[est]);
  }

  // Artifacts.
  const auto dir = ensure_output_dir(config);
  std::string main_csv =
      "estimator,epsilon,total_cost,worst_case,average,mse\n";
  for (std::size_t est = 0; est < n_est; ++est)
    for (std::size_t e = 0; e < n_eps; ++e)
      append_row(main_csv,
                 {result.estimators[est], format_double(config.eps_grid[e]),
                  format_double(result.total_cost[est][e]),
                  format_double(result.worst_case[est][e]),
                  format_double(result.average[est][e]),
                  format_double(result.mse[est][e])});
  write_text_file((dir / "mlmc.csv").string(), main_csv);

  std::string slopes = "estimator,metric,slope,intercept,r_squared\n";
  for (std::size_t est = 0; est < n_est; ++est) {
    append_row(slopes, {result.estimators[est], "total_cost",
                        format_double(result.total_cost_fit[est].slope),
                        format_double(result.total_cost_fit[est].intercept),
                        format_double(result.total_cost_fit[est].r_squared)});
    append_row(slopes, {result.estimators[est], "worst_case",
                        format_double(result.worst_case_fit[est].slope),
                        format_double(result.worst_case_fit[est].intercept),
                        format_double(result.worst_case_fit[est].r_squared)});
  }
  write_text_file((dir / "mlmc_slopes.csv").string(), slopes);
  write_text_file((dir / "mlmc_runs.csv").string(), runs_csv);

  std::vector<Series> total_series, worst_series;
  for (std::size_t est = 0; est < n_est; ++est) {
    total_series.push_back(
        Series{result.estimators[est], inv_eps, result.total_cost[est]});
    worst_series.push_back(
        Series{result.estimators[est], inv_eps, result.worst_case[est]});
  }
  AxesSpec ax;
  ax.title = "total cost vs accuracy";
  ax.x_label = "1/eps";
  ax.y_label = "total ticks";
  ax.x_log = true;
  ax.y_log = true;
  emit_svg_plot(total_series, ax, (dir / "mlmc_total.svg").string());
  ax.title = "worst-case completion vs accuracy";
  ax.y_label = "worst-case ticks";
  emit_svg_plot(worst_series, ax, (dir / "mlmc_worst.svg").string());

  return result;
}

// ---------------------------------------------------------------------------
// tail-bench
// ---------------------------------------------------------------------------

TailBenchResult run_tail_bench(const ExperimentConfig& config) {
  validate_config(config);
  require_config(config.scenario == "tail-bench",
                 "run_tail_bench: wrong scenario");

  struct Dist {
    std::string name;
    std::function<double(RngStream&)> draw;
    std::function<std::optional<double>(std::uint64_t)> bound;
    std::function<std::optional<double>(std::uint64_t, double)> evt;
  };
  // Exponential rate 1, standard normal, Pareto survival x^{-2}.
  std::vector<Dist> dists;
  dists.push_back(Dist{
      "exponential",
      [](RngStream& s) { return -std::log(s.uniform()); },
      [](std::uint64_t n) -> std::optional<double> {
        return bound_expected_max(tail::SubExponential{1.0, 1.0, 1.0}, n);
      },
      [](std::uint64_t n, double q) -> std::optional<double> {
        return evt_quantile(tail::ExactExponential{1.0}, n, q);
      }});
  dists.push_back(Dist{
      "normal",
      [](RngStream& s) { return s.normal(); },
      [](std::uint64_t n) -> std::optional<double> {
        return bound_expected_max(tail::SubGaussian{1.0, 0.0}, n);
      },
      [](std::uint64_t n, double q) -> std::optional<double> {
        if (n < 2) return std::nullopt;
        return evt_quantile(tail::Normal{0.0, 1.0}, n, q);
      }});
  dists.push_back(Dist{
      "pareto",
      [](RngStream& s) { return std::sqrt(1.0 / s.uniform()); },
      [](std::uint64_t) -> std::optional<double> { return std::nullopt; },
      [](std::uint64_t n, double q) -> std::optional<double> {
        return evt_quantile(tail::RegularVarying{1.0, 2.0}, n, q);
      }});

  TailBenchResult result;
  result.rows.resize(dists.size() * config.tail_n_grid.size());

  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t d = 0; d < dists.size(); ++d)
    for (std::size_t i = 0; i < config.tail_n_grid.size(); ++i)
      cells.emplace_back(d, i);

  parallel_for(cells.size(), [&](std::size_t c) {
    const auto [d, i] = cells[c];
    const std::uint64_t n = config.tail_n_grid[i];
    std::vector<double> maxima(config.tail_reps);
    for (std::uint64_t r = 0; r < config.tail_reps; ++r) {
      RngStream stream(
          config.seed,
          scoped_lane(kLaneTailBench,
                      static_cast<std::uint32_t>((d << 8) | i),
                      static_cast<std::uint32_t>(r)));
      double mx = -std::numeric_limits<double>::infinity();
      for (std::uint64_t t = 0; t < n; ++t)
        mx = std::max(mx, dists[d].draw(stream));
      maxima[r] = mx;
    }
    TailBenchRow row;
    row.distribution = dists[d].name;
    row.n = n;
    row.empirical_mean = mean_of(maxima);
    row.mean_bound = dists[d].bound(n);
    const std::array<double, 3> qs{0.25, 0.5, 0.75};
    std::sort(maxima.begin(), maxima.end());
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      row.empirical_q[qi] = quantile_sorted(maxima, qs[qi]);
      row.evt_q[qi] = dists[d].evt(n, qs[qi]);
    }
    result.rows[d * config.tail_n_grid.size() + i] = std::move(row);
  }, config.threads);

  const auto dir = ensure_output_dir(config);
  std::string csv =
      "distribution,n,empirical_mean,mean_bound,q25,q50,q75,evt_q25,evt_q50,"
      "evt_q75\n";
  for (const auto& row : result.rows)
    append_row(csv, {row.distribution, format_u64(row.n),
                     format_double(row.empirical_mean),
                     opt_cell(row.mean_bound),
                     format_double(row.empirical_q[0]),
                     format_double(row.empirical_q[1]),
                     format_double(row.empirical_q[2]), opt_cell(row.evt_q[0]),
                     opt_cell(row.evt_q[1]), opt_cell(row.evt_q[2])});
  write_text_file((dir / "tail.csv").string(), csv);

  std::vector<double> n_real(config.tail_n_grid.begin(),
                             config.tail_n_grid.end());
  std::vector<Series> series;
  for (std::size_t d = 0; d < dists.size(); ++d) {
    Series s{dists[d].name, n_real, {}};
    for (std::size_t i = 0; i < n_real.size(); ++i)
      s.ys.push_back(result.rows[d * n_real.size() + i].empirical_mean);
    series.push_back(std::move(s));
  }
  AxesSpec ax;
  ax.title = "mean of n-draw maxima";
  ax.x_label = "n";
  ax.y_label = "E[max]";
  ax.x_log = true;
  emit_svg_plot(series, ax, (dir / "tail.svg").string());

  return result;
}

// ---------------------------------------------------------------------------
// farm-demo
// ---------------------------------------------------------------------------

FarmDemoResult run_farm_demo(const ExperimentConfig& config) {
  validate_config(config);
  require_config(config.scenario == "farm-demo",
                 "run_farm_demo: wrong scenario");

  // Coin-flip sampler: flip until heads, output the number of flips; the
  // tick cost equals the flips consumed.
  Sampler sampler = [](RngStream& stream) {
    std::uint64_t flips = 1;
    while (stream.uniform() >= 0.5) ++flips;
    return CostedSample{static_cast<double>(flips), flips};
  };

  FarmDemoResult result;
  const std::optional<std::uint64_t> avail =
      config.demo_processors == 0
          ? kUnbounded
          : std::optional<std::uint64_t>(config.demo_processors);
  result.plan =
      plan_unbiased(config.demo_variance_bound, config.demo_epsilon, avail);
  const FarmLedger ledger =
      run_farm(result.plan, sampler, config.seed, config.threads);
  result.farm_metrics = metrics(ledger);
  result.estimate = aggregate(ledger);

  const auto dir = ensure_output_dir(config);
  write_text_file((dir / "ledger.csv").string(), ledger_csv(ledger));
  write_text_file((dir / "metrics.csv").string(),
                  metrics_csv(result.farm_metrics, result.plan, config.seed));
  return result;
}

// ---------------------------------------------------------------------------
// scenario dispatch + per-scenario assertions
// ---------------------------------------------------------------------------

namespace {

void check_case_study(const CaseStudyResult& result, CheckList& checks) {
  const double slope = result.err2_loglog.slope;
  checks.add(slope >= -1.1 && slope <= -0.9,
             "err2 log-log slope " + format_double(slope) +
                 " within [-1.1,-0.9]");
  checks.add(result.completion_logfit.r_squared >= 0.9,
             "completion vs ln M linear fit r2 " +
                 format_double(result.completion_logfit.r_squared) + " >= 0.9");

  const auto& mg = result.m_grid;
  const auto find_m = [&](std::uint64_t m) {
    const auto it = std::find(mg.begin(), mg.end(), m);
    return it == mg.end() ? std::size_t(-1)
                          : static_cast<std::size_t>(it - mg.begin());
  };
  const std::size_t i25k = find_m(25000), i100k = find_m(100000);
  if (i25k != std::size_t(-1) && i100k != std::size_t(-1)) {
    const double ratio = result.completion[i100k] / result.completion[i25k];
    checks.add(ratio <= 1.25, "completion growth T(1e5)/T(2.5e4) = " +
                                  format_double(ratio) + " <= 1.25");
  } else {
    checks.note("completion-growth ratio skipped: grid lacks 2.5e4 or 1e5");
  }

  // Crossover against the longest standard run, when the grid allows it.
  const auto& ng = result.n_grid;
  const auto it100 = std::find(ng.begin(), ng.end(), std::uint64_t{100});
  const std::size_t i_m100 = find_m(100);
  if (it100 != ng.end() && i100k != std::size_t(-1) &&
      i_m100 != std::size_t(-1)) {
    const std::size_t n_idx = static_cast<std::size_t>(it100 - ng.begin());
    std::size_t win_large = 0, win_small = 0;
    const std::size_t reps = result.rep_err2.size();
    for (std::size_t r = 0; r < reps; ++r) {
      win_large += result.rep_err2[r][i100k] <
                   result.rep_std_err2[r][n_idx][i100k];
      win_small += result.rep_std_err2[r][n_idx][i_m100] <
                   result.rep_err2[r][i_m100];
    }
    const double frac_large =
        static_cast<double>(win_large) / static_cast<double>(reps);
    const double frac_small =
        static_cast<double>(win_small) / static_cast<double>(reps);
    checks.add(frac_large >= 0.95,
               "unbiased beats standard(N=100) at M=1e5 in " +
                   format_double(frac_large * 100.0) + "% of macro-reps");
    checks.add(frac_small >= 0.95,
               "standard(N=100) beats unbiased at M=1e2 in " +
                   format_double(frac_small * 100.0) + "% of macro-reps");
  } else {
    checks.note("crossover check skipped: grid lacks M=1e2/1e5 or N=100");
  }

  const auto it10 = std::find(ng.begin(), ng.end(), std::uint64_t{10});
  if (it10 != ng.end() && it100 != ng.end()) {
    const std::size_t i10 = static_cast<std::size_t>(it10 - ng.begin());
    const std::size_t i100n = static_cast<std::size_t>(it100 - ng.begin());
    const double plateau10 = result.std_err2[i10].back();
    const double plateau100 = result.std_err2[i100n].back();
    const double ratio = plateau10 / plateau100;
    checks.add(ratio >= 25.0 && ratio <= 400.0,
               "bias plateau ratio err2(N=10)/err2(N=100) = " +
                   format_double(ratio) + " within [25,400]");
  } else {
    checks.note("plateau check skipped: n grid lacks 10 or 100");
  }
}

void check_mlmc_sweep(const ExperimentConfig& config,
                      const MlmcSweepResult& result, CheckList& checks) {
  const double g_over_a = config.gamma / config.alpha;
  const double rmlmc_worst_limit =
      4.0 * config.gamma / (config.beta + config.gamma) + 0.15;

  const auto idx = [&](const char* name) {
    return static_cast<std::size_t>(
        std::find(result.estimators.begin(), result.estimators.end(), name) -
        result.estimators.begin());
  };
  const std::size_t giles = idx("giles"), naive = idx("naive-parallel"),
                    rml = idx("rmlmc"), trunc = idx("truncated-rmlmc");

  const auto in_band = [&](std::size_t est, bool total, double center,
                           double tol, const char* label) {
    const double slope = total ? result.total_cost_fit[est].slope
                               : result.worst_case_fit[est].slope;
    checks.add(std::abs(slope - center) <= tol,
               std::string(label) + " slope " + format_double(slope) +
                   " within " + format_double(center) + " +- " +
                   format_double(tol));
  };
  in_band(giles, true, 2.0, 0.2, "giles total-cost");
  in_band(rml, true, 2.0, 0.2, "rmlmc total-cost");
  in_band(naive, true, 2.0 + g_over_a, 0.2, "naive-parallel total-cost");
  in_band(naive, false, g_over_a, 0.15, "naive-parallel worst-completion");
  in_band(trunc, false, g_over_a, 0.15, "truncated-rmlmc worst-completion");
  {
    const double slope = result.worst_case_fit[rml].slope;
    checks.add(slope <= rmlmc_worst_limit,
               "rmlmc worst-completion slope " + format_double(slope) +
                   " <= " + format_double(rmlmc_worst_limit));
  }
  for (std::size_t e = 0; e < result.eps_grid.size(); ++e) {
    const double eps = result.eps_grid[e];
    checks.add(result.trunc_bias[e] <= eps / 2.0,
               "truncated bias |s_L - 1| = " +
                   format_double(result.trunc_bias[e]) + " <= eps/2 at eps=" +
                   format_double(eps));
  }
}

void check_tail_bench(const TailBenchResult& result, CheckList& checks) {
  for (const auto& row : result.rows) {
    if (row.mean_bound)
      checks.add(row.empirical_mean <= *row.mean_bound,
                 row.distribution + " n=" + format_u64(row.n) +
                     ": empirical mean " + format_double(row.empirical_mean) +
                     " <= bound " + format_double(*row.mean_bound));
    if (row.distribution == "exponential" &&
        (row.n == 10 || row.n == 100 || row.n == 1000)) {
      double harmonic = 0.0;
      for (std::uint64_t k = 1; k <= row.n; ++k)
        harmonic += 1.0 / static_cast<double>(k);
      const double rel =
          std::abs(row.empirical_mean - harmonic) / harmonic;
      checks.add(rel <= 0.02, "exponential n=" + format_u64(row.n) +
                                  ": mean of maxima within 2% of harmonic "
                                  "number (rel err " +
                                  format_double(rel) + ")");
    }
    if (row.distribution == "exponential" && row.n == 100 && row.evt_q[1]) {
      const double diff = std::abs(row.empirical_q[1] - *row.evt_q[1]);
      checks.add(diff <= 0.15,
                 "exponential n=100: empirical median within 0.15 of "
                 "asymptotic quantile (diff " +
                     format_double(diff) + ")");
    }
    if (row.distribution == "pareto" && row.n == 100 && row.evt_q[1]) {
      const double rel =
          std::abs(row.empirical_q[1] - *row.evt_q[1]) / *row.evt_q[1];
      checks.add(rel <= 0.05,
                 "pareto n=100: empirical median within 5% of asymptotic "
                 "quantile (rel err " +
                     format_double(rel) + ")");
    }
  }
}

void check_farm_demo(const ExperimentConfig& config,
                     const FarmDemoResult& result, CheckList& checks) {
  const FarmDemoResult again = run_farm_demo(config);
  checks.add(again.estimate == result.estimate &&
                 again.farm_metrics.total_cost == result.farm_metrics.total_cost,
             "re-run with the same seed reproduces the farm exactly");
  checks.add(static_cast<double>(result.farm_metrics.worst_case) >=
                 result.farm_metrics.average,
             "worst-case completion >= average completion");
}

}  // namespace

ScenarioOutcome run_scenario(const ExperimentConfig& config, bool check) {
  ScenarioOutcome outcome;
  CheckList checks;
  if (config.scenario == "mcmc-case-study") {
    const CaseStudyResult result = run_mcmc_case_study(config);
    if (check) check_case_study(result, checks);
  } else if (config.scenario == "mlmc-sweep") {
    const MlmcSweepResult result = run_mlmc_sweep(config);
    if (check) check_mlmc_sweep(config, result, checks);
  } else if (config.scenario == "tail-bench") {
    const TailBenchResult result = run_tail_bench(config);
    if (check) check_tail_bench(result, checks);
  } else if (config.scenario == "farm-demo") {
    const FarmDemoResult result = run_farm_demo(config);
    if (check) check_farm_demo(config, result, checks);
  } else {
    throw ConfigError("unknown scenario: " + config.scenario);
  }
  outcome.checks_passed = checks.passed;
  outcome.check_lines = std::move(checks.lines);
  return outcome;
}

}  // namespace parmc

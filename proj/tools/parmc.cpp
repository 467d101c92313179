#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "parmc/errors.hpp"
#include "parmc/experiments.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw parmc::ConfigError("cannot read config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parmc: parallel Monte Carlo cost experiments"};

  std::string scenario;
  app.add_option("scenario", scenario,
                 "mcmc-case-study | mlmc-sweep | tail-bench | farm-demo")
      ->required();
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");
  std::int64_t seed = -1;
  app.add_option("--seed", seed, "random seed (overrides config)");
  std::int64_t reps = -1;
  app.add_option("--reps", reps, "macro-repetitions (overrides config)");
  std::string out_dir;
  app.add_option("--out", out_dir, "output directory (overrides config)");
  bool check = false;
  app.add_flag("--check", check, "run the scenario's assertion set");

  CLI11_PARSE(app, argc, argv);

  try {
    parmc::ExperimentConfig config;
    if (!config_path.empty()) {
      config = parmc::parse_config(read_file(config_path));
      if (config.scenario != scenario)
        throw parmc::ConfigError("config scenario '" + config.scenario +
                                 "' does not match CLI scenario '" + scenario +
                                 "'");
    } else {
      config = parmc::default_config(scenario);
    }
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (reps >= 0) config.repetitions = static_cast<std::uint64_t>(reps);
    if (!out_dir.empty()) config.output_dir = out_dir;
    parmc::validate_config(config);

    const parmc::ScenarioOutcome outcome = parmc::run_scenario(config, check);
    for (const auto& line : outcome.check_lines) std::cout << line << "\n";
    std::cout << "wrote artifacts to " << config.output_dir << "\n";
    if (check && !outcome.checks_passed) {
      std::cerr << "checks failed\n";
      return 3;
    }
    return 0;
  } catch (const parmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

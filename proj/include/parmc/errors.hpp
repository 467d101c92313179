#ifndef PARMC_ERRORS_HPP
#define PARMC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace parmc {

// Bad numeric inputs (non-finite, out of range, violated preconditions).
using DomainError = std::invalid_argument;

// A regression could not be performed (degenerate data).
struct FitError : std::runtime_error {
  explicit FitError(const std::string& what) : std::runtime_error(what) {}
};

// A coupled run exceeded its step budget; carries the partial state.
struct NonTerminationError : std::runtime_error {
  NonTerminationError(const std::string& what, std::uint64_t steps_done,
                      double lead, double lagged)
      : std::runtime_error(what), steps(steps_done), y(lead), z(lagged) {}
  std::uint64_t steps;
  double y;
  double z;
};

// Invalid experiment configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A sampler failed inside a farm run; carries the replication address.
struct FarmError : std::runtime_error {
  FarmError(const std::string& what, std::uint64_t proc, std::uint64_t rep)
      : std::runtime_error(what), processor(proc), replication(rep) {}
  std::uint64_t processor;
  std::uint64_t replication;
};

}  // namespace parmc

#endif

#ifndef PARMC_MCMC_HPP
#define PARMC_MCMC_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "parmc/costsim.hpp"
#include "parmc/rng.hpp"
#include "parmc/tails.hpp"

namespace parmc {

// A target distribution given by an unnormalized log-density plus a
// starting distribution.
struct Target {
  std::function<double(double)> log_density;
  std::function<double(RngStream&)> initial_sampler;
};

Target standard_normal_target(double mean = 0.0, double init_mean = 1.0,
                              double init_sd = 1.0);

// One random-walk Metropolis transition: propose x + sigma*Z, accept with
// probability min(1, pi(x')/pi(x)). Consumes one proposal draw and one
// uniform per call.
double rwm_step(double x, const Target& target, double sigma,
                RngStream& stream);

// Average of f along n kernel transitions from x0; cost is n ticks.
CostedSample ergodic_average(
    const std::function<double(double, RngStream&)>& kernel, double x0,
    const std::function<double(double)>& f, std::uint64_t n,
    RngStream& stream);

// Standard ergodic-average estimator: chain started from initial_sampler,
// no burn-in, one tick per transition.
CostedSample mcmc_estimate(const Target& target,
                           const std::function<double(double)>& f,
                           std::uint64_t n, double sigma, RngStream& stream);

struct CoupledProposal {
  double x_prop;
  double y_prop;
  bool proposals_equal;
};

// Reflection-maximal coupling of N(x, sigma^2) and N(y, sigma^2): the
// proposals coincide with the total-variation overlap probability
// 2 Phi(-|x-y|/(2 sigma)), otherwise the second proposal uses the
// reflected noise. Both marginals are exact.
CoupledProposal reflection_coupled_proposal(double x, double y, double sigma,
                                            RngStream& stream);

// Lag-1 pair: lead chain at time t, lagged chain at time t-1.
struct CoupledState {
  double y = 0.0;
  double z = 0.0;
  std::uint64_t t = 0;
  bool met = false;
  std::vector<double> y_history;  // Y_0 .. Y_t
  std::vector<double> z_history;  // Z_0 .. Z_{t-1}
};

// Advances (Y_t, Z_{t-1}) -> (Y_{t+1}, Z_t) with coupled proposals and a
// shared accept-reject uniform. Sets `met` on exact state equality; a met
// pair transitions identically forever (checked, throws std::logic_error
// on violation).
CoupledState coupled_kernel_step(CoupledState state, const Target& target,
                                 double sigma, RngStream& stream);

// f(Y_k) + sum_{i=k+1}^{tau-1} (f(Y_i) - f(Z_{i-1})); empty sum when
// tau - 1 < k + 1.
double h_k_from_histories(std::span<const double> ys,
                          std::span<const double> zs, std::uint64_t tau,
                          std::uint64_t k,
                          const std::function<double(double)>& f);

struct CouplingRun {
  std::uint64_t tau = 0;
  double h_k = 0.0;
  std::uint64_t cost = 0;
};

struct UnbiasedRunOptions {
  std::uint64_t max_joint_steps = 1000000;
};

// Runs the coupled pair until meeting (and past it up to time k+1 when
// needed) and evaluates the debiased estimator. Cost: one tick for the
// initial lead transition, two per joint step, one per post-meeting lead
// step.
CouplingRun unbiased_mcmc_run(const Target& target,
                              const std::function<double(double)>& f,
                              std::uint64_t k, double sigma,
                              RngStream& stream,
                              const UnbiasedRunOptions& options = {});

// Empirical survival of meeting times plus a geometric decay estimate
// kappa_hat = exp(slope of ln P[tau > n] vs n). kappa_hat is empty when
// the regression is degenerate.
struct CouplingTailSummary {
  std::vector<std::pair<std::uint64_t, double>> survival;
  std::optional<TailFit> fit;
  std::optional<double> kappa_hat;
};

CouplingTailSummary coupling_time_tail(std::span<const std::uint64_t> taus);

}  // namespace parmc

#endif

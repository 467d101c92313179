#include "parmc/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parmc/csv.hpp"
#include "parmc/errors.hpp"

namespace parmc {

namespace {

void check_sigma(double sigma, const char* what) {
  if (!std::isfinite(sigma) || sigma <= 0.0)
    throw DomainError(std::string(what) + ": sigma must be finite and > 0");
}

double checked_log_density(const Target& target, double x, const char* what) {
  const double lp = target.log_density(x);
  if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity())
    throw DomainError(std::string(what) +
                      ": log-density not finite at current state");
  return lp;  // -inf proposals are fine, they are simply rejected
}

}  // namespace

Target standard_normal_target(double mean, double init_mean, double init_sd) {
  Target t;
  t.log_density = [mean](double x) {
    const double d = x - mean;
    return -0.5 * d * d;
  };
  t.initial_sampler = [init_mean, init_sd](RngStream& stream) {
    return init_mean + init_sd * stream.normal();
  };
  return t;
}

double rwm_step(double x, const Target& target, double sigma,
                RngStream& stream) {
  check_sigma(sigma, "rwm_step");
  const double lp_x = checked_log_density(target, x, "rwm_step");
  const double proposal = x + sigma * stream.normal();
  const double lp_p = target.log_density(proposal);
  const double log_ratio = lp_p - lp_x;
  const double u = stream.uniform();
  if (log_ratio >= 0.0 || std::log(u) < log_ratio) return proposal;
  return x;
}

CostedSample ergodic_average(
    const std::function<double(double, RngStream&)>& kernel, double x0,
    const std::function<double(double)>& f, std::uint64_t n,
    RngStream& stream) {
  if (n == 0) throw DomainError("ergodic_average: n must be >= 1");
  double x = x0;
  double sum = 0.0;
  for (std::uint64_t i = 0; i < n; ++i) {
    x = kernel(x, stream);
    sum += f(x);
  }
  return CostedSample{sum / static_cast<double>(n), n};
}

CostedSample mcmc_estimate(const Target& target,
                           const std::function<double(double)>& f,
                           std::uint64_t n, double sigma, RngStream& stream) {
  check_sigma(sigma, "mcmc_estimate");
  const double x0 = target.initial_sampler(stream);
  double lp = checked_log_density(target, x0, "mcmc_estimate");
  // Same transition as rwm_step with the current log-density cached.
  auto kernel = [&](double x, RngStream& s) {
    const double proposal = x + sigma * s.normal();
    const double lp_p = target.log_density(proposal);
    const double log_ratio = lp_p - lp;
    const double u = s.uniform();
    if (log_ratio >= 0.0 || std::log(u) < log_ratio) {
      lp = lp_p;
      return proposal;
    }
    return x;
  };
  return ergodic_average(kernel, x0, f, n, stream);
}

CoupledProposal reflection_coupled_proposal(double x, double y, double sigma,
                                            RngStream& stream) {
  check_sigma(sigma, "reflection_coupled_proposal");
  const double z = stream.normal();
  const double u = stream.uniform();
  const double x_prop = x + sigma * z;
  const double delta = (x - y) / sigma;
  // Couple when u * phi(z) <= phi(z + delta).
  const double log_couple = 0.5 * z * z - 0.5 * (z + delta) * (z + delta);
  if (log_couple >= 0.0 || std::log(u) <= log_couple)
    return CoupledProposal{x_prop, x_prop, true};
  return CoupledProposal{x_prop, y - sigma * z, false};
}

CoupledState coupled_kernel_step(CoupledState state, const Target& target,
                                 double sigma, RngStream& stream) {
  check_sigma(sigma, "coupled_kernel_step");
  const bool was_met = state.met;

  const CoupledProposal prop =
      reflection_coupled_proposal(state.y, state.z, sigma, stream);
  const double lp_y = checked_log_density(target, state.y,
                                          "coupled_kernel_step");
  const double lp_z = (state.z == state.y)
                          ? lp_y
                          : checked_log_density(target, state.z,
                                                "coupled_kernel_step");
  const double lp_yp = target.log_density(prop.x_prop);
  const double lp_zp =
      prop.proposals_equal ? lp_yp : target.log_density(prop.y_prop);

  // Common random numbers: one uniform decides both accept-reject tests.
  const double log_u = std::log(stream.uniform());
  const bool accept_y = (lp_yp - lp_y >= 0.0) || log_u < (lp_yp - lp_y);
  const bool accept_z = (lp_zp - lp_z >= 0.0) || log_u < (lp_zp - lp_z);

  state.y = accept_y ? prop.x_prop : state.y;
  state.z = accept_z ? prop.y_prop : state.z;
  state.t += 1;
  state.y_history.push_back(state.y);
  state.z_history.push_back(state.z);
  if (state.y == state.z) state.met = true;

  if (was_met && state.y != state.z)
    throw std::logic_error("coupled_kernel_step: faithfulness violated");
  return state;
}

double h_k_from_histories(std::span<const double> ys,
                          std::span<const double> zs, std::uint64_t tau,
                          std::uint64_t k,
                          const std::function<double(double)>& f) {
  if (tau == 0) throw DomainError("h_k_from_histories: tau must be >= 1");
  if (ys.size() <= k)
    throw DomainError("h_k_from_histories: lead history misses Y_k");
  if (tau >= 2 && (ys.size() < tau || zs.size() + 1 < tau))
    throw DomainError("h_k_from_histories: histories shorter than tau");
  double h = f(ys[k]);
  for (std::uint64_t i = k + 1; i + 1 <= tau; ++i)
    h += f(ys[i]) - f(zs[i - 1]);
  return h;
}

CouplingRun unbiased_mcmc_run(const Target& target,
                              const std::function<double(double)>& f,
                              std::uint64_t k, double sigma,
                              RngStream& stream,
                              const UnbiasedRunOptions& options) {
  check_sigma(sigma, "unbiased_mcmc_run");

  const double y0 = target.initial_sampler(stream);
  const double z0 = target.initial_sampler(stream);
  const double y1 = rwm_step(y0, target, sigma, stream);

  CoupledState state;
  state.y = y1;
  state.z = z0;
  state.t = 1;
  state.y_history = {y0, y1};
  state.z_history = {z0};
  state.met = (y1 == z0);

  CouplingRun run;
  run.cost = 1;  // the initial lead transition
  std::uint64_t joint_steps = 0;
  while (!state.met) {
    if (joint_steps >= options.max_joint_steps)
      throw NonTerminationError(
          "unbiased_mcmc_run: no meeting after " +
              format_u64(joint_steps) + " joint steps (y=" +
              format_double(state.y) + ", z=" + format_double(state.z) + ")",
          joint_steps, state.y, state.z);
    state = coupled_kernel_step(std::move(state), target, sigma, stream);
    ++joint_steps;
    run.cost += 2;
  }
  run.tau = state.t;

  // The estimator needs Y_k; after meeting the pair advances as one chain.
  while (state.t < k + 1) {
    state = coupled_kernel_step(std::move(state), target, sigma, stream);
    run.cost += 1;
  }

  run.h_k = h_k_from_histories(state.y_history, state.z_history, run.tau, k,
                               f);
  return run;
}

CouplingTailSummary coupling_time_tail(std::span<const std::uint64_t> taus) {
  if (taus.size() < 100)
    throw DomainError("coupling_time_tail: need at least 100 samples");
  CouplingTailSummary out;
  const std::uint64_t max_tau = *std::max_element(taus.begin(), taus.end());
  const double n = static_cast<double>(taus.size());
  out.survival.reserve(max_tau);
  for (std::uint64_t t = 1; t <= max_tau; ++t) {
    std::size_t above = 0;
    for (std::uint64_t tau : taus) above += (tau > t);
    out.survival.emplace_back(t, static_cast<double>(above) / n);
  }
  std::vector<double> as_real(taus.begin(), taus.end());
  try {
    const TailFit fit = fit_tail_exponent(as_real);
    out.fit = fit;
    out.kappa_hat = std::exp(fit.slope);
  } catch (const FitError&) {
    // degenerate sample: survival is still reported, the rate is not
  }
  return out;
}

}  // namespace parmc

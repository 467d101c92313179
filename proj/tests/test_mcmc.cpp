#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <doctest.h>

#include "parmc/errors.hpp"
#include "parmc/mcmc.hpp"
#include "parmc/stats.hpp"
#include "support/test_util.hpp"

using namespace parmc;

namespace {

Target flat_target() {
  Target t;
  t.log_density = [](double) { return 0.0; };
  t.initial_sampler = [](RngStream& s) { return s.normal(); };
  return t;
}

double identity(double x) { return x; }

}  // namespace

TEST_CASE("single Metropolis transition") {
  SUBCASE("flat target accepts every proposal") {
    const Target flat = flat_target();
    RngStream s(1, 0);
    RngStream replay(1, 0);
    double x = 0.3;
    for (int i = 0; i < 200; ++i) {
      const double next = rwm_step(x, flat, 1.7, s);
      const double z = replay.normal();
      replay.uniform();
      CHECK(next == x + 1.7 * z);
      x = next;
    }
  }
  SUBCASE("acceptance rate from the mode matches quadrature") {
    // One-step acceptance from x = 0 for a standard normal target is
    // E[min(1, exp(-sigma^2 Z^2 / 2))]; evaluate by Simpson's rule.
    const double sigma = 2.38;
    const auto phi = [](double z) {
      return std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
    };
    const double oracle = testutil::integrate(
        [&](double z) {
          return phi(z) * std::min(1.0, std::exp(-0.5 * sigma * sigma * z * z));
        },
        -9.0, 9.0);
    const Target target = standard_normal_target();
    RngStream s(2, 0);
    const int n = 100000;
    int accepted = 0;
    for (int i = 0; i < n; ++i) accepted += (rwm_step(0.0, target, sigma, s) != 0.0);
    const double rate = static_cast<double>(accepted) / n;
    CHECK(std::abs(rate - oracle) <= 0.01);
    // the Gaussian integral has the closed form 1/sqrt(1+sigma^2)
    CHECK(oracle ==
          doctest::Approx(1.0 / std::sqrt(1.0 + sigma * sigma)).epsilon(1e-6));
  }
  SUBCASE("vanishing step size freezes the chain") {
    const Target target = standard_normal_target();
    RngStream s(3, 0);
    for (int i = 0; i < 50; ++i) CHECK(rwm_step(1.0, target, 1e-300, s) == 1.0);
  }
  SUBCASE("invalid inputs") {
    const Target target = standard_normal_target();
    RngStream s(4, 0);
    CHECK_THROWS_AS(rwm_step(0.0, target, 0.0, s), DomainError);
    Target bad;
    bad.log_density = [](double) { return std::nan(""); };
    bad.initial_sampler = [](RngStream&) { return 0.0; };
    CHECK_THROWS_AS(rwm_step(0.0, bad, 1.0, s), DomainError);
  }
}

TEST_CASE("ergodic average over a kernel") {
  SUBCASE("deterministic kernel visiting 1,2,3") {
    const auto inc = [](double x, RngStream&) { return x + 1.0; };
    RngStream s(5, 0);
    const CostedSample est = ergodic_average(inc, 0.0, identity, 3, s);
    CHECK(est.value == doctest::Approx(2.0));
    CHECK(est.cost == 3);
  }
  SUBCASE("n = 1 returns the first state") {
    const auto inc = [](double x, RngStream&) { return x + 1.0; };
    RngStream s(5, 0);
    const CostedSample est = ergodic_average(inc, 4.0, identity, 1, s);
    CHECK(est.value == doctest::Approx(5.0));
  }
  SUBCASE("n must be positive") {
    const auto inc = [](double x, RngStream&) { return x + 1.0; };
    RngStream s(5, 0);
    CHECK_THROWS_AS(ergodic_average(inc, 0.0, identity, 0, s), DomainError);
  }
}

TEST_CASE("standard estimator bias shrinks like 1/n") {
  const Target target = standard_normal_target();  // truth 0, start near 1
  const int reps = 100000;
  double sum10 = 0.0, sum100 = 0.0;
  for (int r = 0; r < reps; ++r) {
    RngStream s10(41, parmc::lane_of(1, r));
    sum10 += mcmc_estimate(target, identity, 10, 2.38, s10).value;
    RngStream s100(41, parmc::lane_of(2, r));
    sum100 += mcmc_estimate(target, identity, 100, 2.38, s100).value;
  }
  const double bias10 = std::abs(sum10 / reps);
  const double bias100 = std::abs(sum100 / reps);
  CHECK(bias100 > 0.0);
  CHECK(bias100 <= 0.05);
  const double ratio = bias10 / bias100;
  CHECK(ratio >= 5.0);
  CHECK(ratio <= 20.0);
}

TEST_CASE("coupled proposals") {
  SUBCASE("equal states always couple") {
    RngStream s(6, 0);
    for (int i = 0; i < 1000; ++i) {
      const CoupledProposal p = reflection_coupled_proposal(0.7, 0.7, 2.0, s);
      CHECK(p.proposals_equal);
      CHECK(p.x_prop == p.y_prop);
    }
  }
  SUBCASE("meeting probability equals the density overlap") {
    // quadrature oracle: integral of min of the two proposal densities
    const auto overlap = [](double x, double y, double sigma) {
      return testutil::integrate(
          [&](double t) {
            const auto phi = [](double u) {
              return std::exp(-0.5 * u * u) /
                     std::sqrt(2.0 * 3.14159265358979323846);
            };
            return std::min(phi((t - x) / sigma), phi((t - y) / sigma)) /
                   sigma;
          },
          -40.0, 40.0, 8000);
    };
    const std::array<std::array<double, 3>, 4> points{{
        {0.0, 0.0, 1.0}, {0.0, 1.0, 1.0}, {0.0, 2.0, 1.0}, {0.0, 1.0, 2.38}}};
    int lane = 0;
    for (const auto& [x, y, sigma] : points) {
      const double closed = 2.0 * normal_cdf(-std::abs(x - y) / (2.0 * sigma));
      CHECK(overlap(x, y, sigma) == doctest::Approx(closed).epsilon(1e-4));
      RngStream s(7, parmc::lane_of(3, lane++));
      const int n = 1000000;
      int met = 0;
      for (int i = 0; i < n; ++i)
        met += reflection_coupled_proposal(x, y, sigma, s).proposals_equal;
      const double freq = static_cast<double>(met) / n;
      const double se = std::sqrt(closed * (1.0 - closed) / n);
      CHECK(std::abs(freq - closed) <= std::max(3.0 * se, 1e-6));
    }
    // spot value from the overlap formula
    CHECK(2.0 * normal_cdf(-1.0) == doctest::Approx(0.3173).epsilon(1e-3));
  }
  SUBCASE("second proposal keeps its marginal") {
    RngStream s(8, 0);
    const int n = 1000000;
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i)
      ys[i] = reflection_coupled_proposal(0.0, 2.0, 1.0, s).y_prop;
    CHECK(testutil::ks_one_sample_passes(
        ys, [](double t) { return normal_cdf(t - 2.0); }, 1e-3));
  }
}

TEST_CASE("coupled kernel step") {
  const Target target = standard_normal_target();
  SUBCASE("met pairs stay glued") {
    CoupledState st;
    st.y = st.z = 0.4;
    st.t = 3;
    st.met = true;
    st.y_history = {0.0, 0.1, 0.2, 0.4};
    st.z_history = {0.0, 0.1, 0.4};
    RngStream s(9, 0);
    for (int i = 0; i < 200; ++i) {
      st = coupled_kernel_step(std::move(st), target, 2.38, s);
      CHECK(st.y == st.z);
      CHECK(st.met);
    }
  }
  SUBCASE("flat target meets exactly when proposals couple") {
    const Target flat = flat_target();
    for (int i = 0; i < 500; ++i) {
      RngStream s(10, parmc::lane_of(4, i));
      RngStream replay(10, parmc::lane_of(4, i));
      CoupledState st;
      st.y = 0.0;
      st.z = 1.3;
      st.t = 1;
      st.y_history = {0.0, 0.0};
      st.z_history = {1.3};
      const CoupledProposal p =
          reflection_coupled_proposal(0.0, 1.3, 2.0, replay);
      st = coupled_kernel_step(std::move(st), flat, 2.0, s);
      CHECK(st.met == p.proposals_equal);
    }
  }
  SUBCASE("per-chain marginals match the plain kernel") {
    const int n = 500000;
    std::vector<double> lead(n), lagged(n), plain0(n), plain2(n);
    for (int i = 0; i < n; ++i) {
      RngStream s(11, parmc::lane_of(5, i));
      CoupledState st;
      st.y = 0.0;
      st.z = 2.0;
      st.t = 1;
      st.y_history = {0.0, 0.0};
      st.z_history = {2.0};
      st = coupled_kernel_step(std::move(st), target, 2.38, s);
      lead[i] = st.y;
      lagged[i] = st.z;
    }
    for (int i = 0; i < n; ++i) {
      RngStream s(12, parmc::lane_of(6, i));
      plain0[i] = rwm_step(0.0, target, 2.38, s);
    }
    for (int i = 0; i < n; ++i) {
      RngStream s(13, parmc::lane_of(7, i));
      plain2[i] = rwm_step(2.0, target, 2.38, s);
    }
    CHECK(testutil::ks_two_sample_passes(lead, plain0, 1e-3));
    CHECK(testutil::ks_two_sample_passes(lagged, plain2, 1e-3));
  }
}

TEST_CASE("estimator assembly from histories") {
  const std::vector<double> ys{10.0, 11.0, 12.0, 13.0};
  const std::vector<double> zs{20.0, 21.0, 22.0};
  SUBCASE("meeting at the first step leaves only the anchor term") {
    CHECK(h_k_from_histories(ys, zs, 1, 0, identity) == 10.0);
  }
  SUBCASE("later meeting accumulates lead-lag differences") {
    // tau = 3: f(y0) + (y1 - z0) + (y2 - z1)
    CHECK(h_k_from_histories(ys, zs, 3, 0, identity) ==
          doctest::Approx(10.0 + (11.0 - 20.0) + (12.0 - 21.0)));
    // k = 1 drops the first correction
    CHECK(h_k_from_histories(ys, zs, 3, 1, identity) ==
          doctest::Approx(11.0 + (12.0 - 21.0)));
  }
  SUBCASE("input validation") {
    CHECK_THROWS_AS(h_k_from_histories(ys, zs, 0, 0, identity), DomainError);
    CHECK_THROWS_AS(h_k_from_histories(ys, zs, 3, 9, identity), DomainError);
  }
}

// Exhaustive-trajectory oracle: a three-state lazy cycle with a maximal
// coupling of the conditional rows, run through the very same history
// assembly as the continuous sampler. The enumerated expectation of h_0
// must equal the stationary mean of f.
namespace {

struct DiscreteOracle {
  static constexpr int kStates = 3;
  std::array<std::array<double, 3>, 3> kernel;
  std::function<double(double)> f;

  double row(int from, int to) const { return kernel[from][to]; }

  struct Accum {
    double estimate = 0.0;
    double truncated_mass = 0.0;
  };

  void walk(std::vector<double> ys, std::vector<double> zs, double prob,
            int depth_left, Accum& acc) const {
    const int y = static_cast<int>(ys.back());
    const int z = static_cast<int>(zs.back());
    if (y == z) {
      const std::uint64_t tau = ys.size() - 1;  // t with Y_t == Z_{t-1}
      acc.estimate += prob * h_k_from_histories(ys, zs, tau, 0, f);
      return;
    }
    if (depth_left == 0) {
      // treat as met now; the dropped continuation is bounded separately
      acc.estimate += prob * h_k_from_histories(ys, zs, ys.size() - 1, 0, f);
      acc.truncated_mass += prob;
      return;
    }
    // maximal coupling of the rows P(y,.) and P(z,.)
    std::array<double, 3> meet{};
    double overlap = 0.0;
    for (int s = 0; s < kStates; ++s) {
      meet[s] = std::min(row(y, s), row(z, s));
      overlap += meet[s];
    }
    for (int s = 0; s < kStates; ++s) {
      if (meet[s] <= 0.0) continue;
      auto ys2 = ys;
      auto zs2 = zs;
      ys2.push_back(s);
      zs2.push_back(s);
      walk(std::move(ys2), std::move(zs2), prob * meet[s], depth_left - 1,
           acc);
    }
    for (int sy = 0; sy < kStates; ++sy) {
      const double ay = row(y, sy) - meet[sy];
      if (ay <= 0.0) continue;
      for (int sz = 0; sz < kStates; ++sz) {
        const double bz = row(z, sz) - meet[sz];
        if (bz <= 0.0) continue;
        auto ys2 = ys;
        auto zs2 = zs;
        ys2.push_back(sy);
        zs2.push_back(sz);
        walk(std::move(ys2), std::move(zs2),
             prob * ay * bz / (1.0 - overlap), depth_left - 1, acc);
      }
    }
  }
};

}  // namespace

TEST_CASE("enumerated discrete coupling confirms unbiasedness of h_0") {
  DiscreteOracle oracle;
  oracle.kernel = {{{0.5, 0.25, 0.25}, {0.25, 0.5, 0.25}, {0.25, 0.25, 0.5}}};
  oracle.f = [](double s) { return s - 1.0; };  // symmetric around state 1
  // doubly stochastic kernel: stationary law is uniform, E_pi[f] = 0
  DiscreteOracle::Accum acc;
  const int horizon = 12;
  for (int y0 = 0; y0 < 3; ++y0)
    for (int z0 = 0; z0 < 3; ++z0)
      for (int y1 = 0; y1 < 3; ++y1) {
        const double p =
            (1.0 / 9.0) * oracle.row(y0, y1);  // uniform independent starts
        if (p <= 0.0) continue;
        oracle.walk({static_cast<double>(y0), static_cast<double>(y1)},
                    {static_cast<double>(z0)}, p, horizon, acc);
      }
  // each surviving step keeps at most 1/4 of the off-diagonal mass, and a
  // truncated path can still contribute a geometric number of +-2 terms
  const double residual_bound = acc.truncated_mass * 20.0;
  CHECK(acc.truncated_mass < 1e-6);
  CHECK(std::abs(acc.estimate - 0.0) <= residual_bound + 1e-9);
}

TEST_CASE("coupled run produces the debiased estimator") {
  const double sigma = 2.38;
  SUBCASE("meeting at t=1 keeps only f(Y_0)") {
    Target target = standard_normal_target();
    target.initial_sampler = [](RngStream&) { return 0.0; };
    const auto shifted = [](double x) { return x + 7.0; };
    bool seen = false;
    for (int i = 0; i < 200 && !seen; ++i) {
      RngStream s(14, parmc::lane_of(8, i));
      const CouplingRun run = unbiased_mcmc_run(target, shifted, 0, sigma, s);
      if (run.tau == 1) {
        CHECK(run.h_k == doctest::Approx(7.0));
        CHECK(run.cost == 1);
        seen = true;
      }
    }
    CHECK(seen);
  }
  SUBCASE("cost accounting follows the step log") {
    const Target target = standard_normal_target();
    for (std::uint64_t k : {0, 5}) {
      for (int i = 0; i < 300; ++i) {
        RngStream s(15, parmc::lane_of(9, i));
        const CouplingRun run = unbiased_mcmc_run(target, identity, k, sigma, s);
        const std::uint64_t extra =
            (k + 1 > run.tau) ? (k + 1 - run.tau) : 0;
        CHECK(run.cost == 1 + 2 * (run.tau - 1) + extra);
        CHECK(run.cost >= run.tau);
      }
    }
  }
  SUBCASE("grand mean hits the target mean for two targets") {
    const int n = 200000;
    for (double mu : {0.0, 5.0}) {
      const Target target = standard_normal_target(mu, mu + 1.0, 1.0);
      double sum = 0.0, sum2 = 0.0;
      for (int i = 0; i < n; ++i) {
        RngStream s(16, parmc::lane_of(mu == 0.0 ? 10 : 11, i));
        const double h = unbiased_mcmc_run(target, identity, 0, sigma, s).h_k;
        sum += h;
        sum2 += h * h;
      }
      const double mean = sum / n;
      const double sd = std::sqrt((sum2 - sum * sum / n) / (n - 1));
      CHECK(std::abs(mean - mu) <= 4.0 * sd / std::sqrt(n));
    }
  }
  SUBCASE("lag choice does not move the estimand") {
    const Target target = standard_normal_target();
    const int n = 100000;
    double mean_k0 = 0.0, mean_k5 = 0.0, var_k0 = 0.0, var_k5 = 0.0;
    std::vector<double> h0(n), h5(n);
    for (int i = 0; i < n; ++i) {
      RngStream a(17, parmc::lane_of(12, i));
      h0[i] = unbiased_mcmc_run(target, identity, 0, sigma, a).h_k;
      RngStream b(17, parmc::lane_of(13, i));
      h5[i] = unbiased_mcmc_run(target, identity, 5, sigma, b).h_k;
    }
    mean_k0 = mean_of(h0);
    mean_k5 = mean_of(h5);
    var_k0 = variance_of(h0);
    var_k5 = variance_of(h5);
    const double se = std::sqrt((var_k0 + var_k5) / n);
    CHECK(std::abs(mean_k0 - mean_k5) <= 4.0 * se);
  }
  SUBCASE("step budget violations surface the partial state") {
    const Target target = standard_normal_target();
    UnbiasedRunOptions opts;
    opts.max_joint_steps = 1;
    bool threw = false;
    for (int i = 0; i < 50 && !threw; ++i) {
      RngStream s(18, parmc::lane_of(14, i));
      try {
        unbiased_mcmc_run(target, identity, 0, 0.01, s, opts);
      } catch (const NonTerminationError& e) {
        threw = true;
        CHECK(e.steps == 1);
      }
    }
    CHECK(threw);
  }
}

TEST_CASE("meeting time diagnostics") {
  SUBCASE("constant meeting times: survival reported, rate flagged") {
    std::vector<std::uint64_t> taus(150, 3);
    const CouplingTailSummary summary = coupling_time_tail(taus);
    REQUIRE(summary.survival.size() == 3);
    CHECK(summary.survival[0] == std::pair<std::uint64_t, double>{1, 1.0});
    CHECK(summary.survival[1] == std::pair<std::uint64_t, double>{2, 1.0});
    CHECK(summary.survival[2] == std::pair<std::uint64_t, double>{3, 0.0});
    CHECK_FALSE(summary.kappa_hat.has_value());
  }
  SUBCASE("needs at least 100 samples") {
    std::vector<std::uint64_t> few(99, 2);
    CHECK_THROWS_AS(coupling_time_tail(few), DomainError);
  }
  SUBCASE("geometric meeting times recover their decay rate") {
    RngStream s(19, 0);
    const int n = 100000;
    std::vector<std::uint64_t> taus(n);
    for (int i = 0; i < n; ++i) {
      std::uint64_t t = 1;
      while (s.uniform() >= 0.5) ++t;
      taus[i] = t;
    }
    const CouplingTailSummary summary = coupling_time_tail(taus);
    REQUIRE(summary.kappa_hat.has_value());
    CHECK(std::abs(*summary.kappa_hat - 0.5) <= 0.02);
  }
  SUBCASE("case-study meeting times have a geometric tail") {
    const Target target = standard_normal_target();
    const int n = 10000;
    std::vector<std::uint64_t> taus(n);
    for (int i = 0; i < n; ++i) {
      RngStream s(20, parmc::lane_of(15, i));
      taus[i] = unbiased_mcmc_run(target, identity, 0, 2.38, s).tau;
    }
    const CouplingTailSummary summary = coupling_time_tail(taus);
    REQUIRE(summary.fit.has_value());
    CHECK(summary.fit->slope < 0.0);
    CHECK(summary.fit->r_squared >= 0.95);
  }
}

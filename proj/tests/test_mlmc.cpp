#include <cmath>
#include <vector>

#include <doctest.h>

#include "parmc/errors.hpp"
#include "parmc/mlmc.hpp"
#include "parmc/stats.hpp"
#include "support/test_util.hpp"

using namespace parmc;

TEST_CASE("synthetic family closed forms") {
  const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
  CHECK(fam.mean_delta(0) == doctest::Approx(0.5));
  CHECK(fam.mean_delta(1) == doctest::Approx(0.25));
  CHECK(fam.partial_mean(1) == doctest::Approx(0.75));
  // distance to the limit after level 1 is c1 * 2^{-alpha}: 0.5 * 0.5
  CHECK(std::abs(fam.partial_mean(1) - fam.true_value()) ==
        doctest::Approx(fam.c1() * std::exp2(-fam.alpha() * 1.0)));
  CHECK(fam.c1() == doctest::Approx(0.5));
  CHECK(fam.var_delta(3) == doctest::Approx(std::exp2(-6.0)));

  const LevelFamily flat_cost = synthetic_family(1.0, 2.0, 0.0, 1.0, 1.0);
  for (std::uint64_t l : {0, 1, 5, 20})
    CHECK(flat_cost.cost_ticks(l) == 1);

  CHECK_THROWS_AS(synthetic_family(1.0, 1.0, 2.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(synthetic_family(0.4, 2.0, 1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(synthetic_family(1.0, 2.0, 1.0, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(synthetic_family(1.0, 2.0, 1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("level count for a bias target") {
  CHECK(giles_levels(2.0, 1.0, 1.0) == 0);
  CHECK(giles_levels(0.5, 1.0, 1.0) == 2);
  CHECK(giles_levels(0.5, 2.0, 1.0) == 1);
  CHECK_THROWS_AS(giles_levels(0.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(giles_levels(0.5, -1.0, 1.0), DomainError);
}

TEST_CASE("per-level sample counts") {
  // V_l = 4^{-l}, C_l = 2^l realized with beta=2, gamma=1, c2=c3=1.
  const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
  SUBCASE("hand-evaluated two-level case") {
    const GilesAllocation alloc = giles_allocation(1.0, fam, 1);
    REQUIRE(alloc.samples_per_level.size() == 2);
    CHECK(alloc.samples_per_level[0] == 3);
    CHECK(alloc.samples_per_level[1] == 1);
  }
  SUBCASE("single level") {
    // V_0 = C_0 = 1 -> N_0 = ceil(4/3) = 2.
    const GilesAllocation alloc = giles_allocation(1.0, fam, 0);
    CHECK(alloc.samples_per_level[0] == 2);
  }
  SUBCASE("counts never drop below one") {
    const GilesAllocation alloc = giles_allocation(0.9, fam, 12);
    for (const auto n : alloc.samples_per_level) CHECK(n >= 1);
  }
}

TEST_CASE("full multilevel estimate") {
  SUBCASE("deterministic family reproduces the partial mean") {
    // c2 = 0: every level draw equals its mean, so at eps = 0.5 (two
    // levels for alpha = 1, c1 = 1/2) the value is 1 - 2^{-2} exactly.
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 0.0, 1.0);
    RngStream s(1, 0);
    const CostedSample est = giles_estimate(fam, 0.5, s);
    CHECK(est.value == fam.partial_mean(1));
    CHECK(est.value == doctest::Approx(0.75));
    CHECK(est.cost == 3);  // one draw each at costs 1 and 2
  }
  SUBCASE("cost matches the allocation accounting") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const double eps = 0.3;
    const std::uint64_t levels = giles_levels(eps, fam.alpha(), fam.c1());
    const GilesAllocation alloc = giles_allocation(eps, fam, levels);
    RngStream s(2, 0);
    const CostedSample est = giles_estimate(fam, eps, s);
    std::uint64_t expected = 0;
    for (std::uint64_t l = 0; l <= levels; ++l)
      expected += alloc.samples_per_level[l] * fam.cost_ticks(l);
    CHECK(est.cost == expected);
  }
  SUBCASE("empirical MSE within the design budget") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const double eps = 0.2;
    const int runs = 1000;
    std::vector<double> values(runs);
    for (int r = 0; r < runs; ++r) {
      RngStream s(33, parmc::lane_of(0, r));
      values[r] = giles_estimate(fam, eps, s).value;
    }
    double mse = 0.0;
    for (double v : values) mse += testutil::sq(v - 1.0);
    mse /= runs;
    CHECK(mse <= eps * eps);
  }
}

TEST_CASE("one-draw-per-level variant") {
  SUBCASE("deterministic value and geometric cost") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 0.0, 1.0);
    RngStream s(1, 0);
    const CostedSample est = naive_parallel_run(fam, 0.5, s);
    CHECK(est.value == doctest::Approx(0.75));
    CHECK(est.cost == 3);  // 2^{L+1} - 1 with L = 1
  }
  SUBCASE("variance equals the per-level sum") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const double eps = 0.25;
    const std::uint64_t levels = giles_levels(eps, fam.alpha(), fam.c1());
    double analytic = 0.0;
    for (std::uint64_t l = 0; l <= levels; ++l) analytic += fam.var_delta(l);
    const double bound = fam.c2() / (1.0 - std::exp2(-fam.beta()));
    CHECK(analytic <= bound);

    const int runs = 20000;
    std::vector<double> values(runs);
    for (int r = 0; r < runs; ++r) {
      RngStream s(34, parmc::lane_of(0, r));
      values[r] = naive_parallel_run(fam, eps, s).value;
    }
    const double emp = variance_of(values);
    // 4 standard errors of a variance estimate from `runs` draws
    const double tol = 4.0 * analytic * std::sqrt(2.0 / runs);
    CHECK(std::abs(emp - analytic) <= tol);
  }
}

TEST_CASE("geometric level distribution") {
  SUBCASE("ratio and point masses") {
    const LevelPmf p20 = rmlmc_pmf(2.0, 0.0);
    CHECK(p20.ratio().value() == doctest::Approx(0.5));
    CHECK(p20.prob(0) == doctest::Approx(0.5));
    CHECK(p20.prob(2) == doctest::Approx(0.125));
    const LevelPmf p31 = rmlmc_pmf(3.0, 1.0);
    CHECK(p31.prob(0) == doctest::Approx(0.75));
    CHECK(p31.prob(1) == doctest::Approx(0.1875));
  }
  SUBCASE("mass sums to one") {
    for (auto [b, g] : std::vector<std::pair<double, double>>{
             {2.0, 0.0}, {3.0, 1.0}, {1.7, 0.4}}) {
      const LevelPmf pmf = rmlmc_pmf(b, g);
      double sum = 0.0;
      for (std::uint64_t n = 0; n < 400; ++n) sum += pmf.prob(n);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("requires beta > gamma") {
    CHECK_THROWS_AS(rmlmc_pmf(1.0, 1.0), DomainError);
    CHECK_THROWS_AS(rmlmc_pmf(1.0, 2.0), DomainError);
  }
  SUBCASE("sampled levels follow the pmf") {
    const LevelPmf pmf = rmlmc_pmf(2.0, 0.0);
    RngStream s(8, 0);
    const int n = 200000;
    std::vector<std::uint64_t> counts(12, 0);
    for (int i = 0; i < n; ++i) {
      const std::uint64_t lvl = pmf.sample(s);
      if (lvl < counts.size()) ++counts[lvl];
    }
    for (std::uint64_t lvl = 0; lvl < 6; ++lvl) {
      const double expected = pmf.prob(lvl);
      const double observed = static_cast<double>(counts[lvl]) / n;
      const double se = std::sqrt(expected * (1.0 - expected) / n);
      CHECK(std::abs(observed - expected) <= 5.0 * se);
    }
  }
}

TEST_CASE("randomized single-term estimator") {
  SUBCASE("importance weight formula") {
    // p(n) = 2^{-(n+1)} comes from beta=2, gamma=0; a draw of level 2 with
    // Delta = 0.1 maps to 0.1 / 0.125.
    const LevelPmf pmf = rmlmc_pmf(2.0, 0.0);
    CHECK(pmf.prob(2) == doctest::Approx(0.125));
    CHECK(0.1 / pmf.prob(2) == doctest::Approx(0.8));
  }
  SUBCASE("value is the level mean over its probability when c2 = 0") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 0.0, 1.0);
    const LevelPmf pmf = rmlmc_pmf(2.0, 1.0);
    for (int i = 0; i < 200; ++i) {
      RngStream s(21, parmc::lane_of(0, i));
      const CostedSample w = rmlmc_sample(fam, pmf, s);
      // cost = 2^N identifies the drawn level
      const auto level = static_cast<std::uint64_t>(
          std::llround(std::log2(static_cast<double>(w.cost))));
      CHECK(w.value ==
            doctest::Approx(fam.mean_delta(level) / pmf.prob(level)));
    }
  }
  SUBCASE("degenerate pmf is the identity weight") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 0.0, 1.0);
    const LevelPmf pmf = truncated_pmf(2.0, 1.0, 0);
    RngStream s(3, 0);
    const CostedSample w = rmlmc_sample(fam, pmf, s);
    CHECK(w.value == doctest::Approx(fam.mean_delta(0)));
  }
  SUBCASE("grand mean is unbiased within Monte Carlo error") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const LevelPmf pmf = rmlmc_pmf(2.0, 1.0);
    const double oracle_var = rmlmc_variance_oracle(fam, pmf, 200);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      RngStream s(22, parmc::lane_of(0, i));
      sum += rmlmc_sample(fam, pmf, s).value;
    }
    const double mean = sum / n;
    const double se = std::sqrt(oracle_var / n);
    CHECK(std::abs(mean - 1.0) <= 4.0 * se);
  }
}

TEST_CASE("variance oracle for the importance-weighted estimator") {
  const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
  const LevelPmf pmf = rmlmc_pmf(2.0, 1.0);
  SUBCASE("matches an independently derived closed form") {
    // Terms collapse to 1.25 (1/(4r))^n / (1-r): two geometric sums.
    const double r = std::exp2(-1.5);
    const double expected =
        1.25 / ((1.0 - r) * (1.0 - std::exp2(-0.5))) - 1.0;
    const double got = rmlmc_variance_oracle(fam, pmf, 400);
    CHECK(got == doctest::Approx(expected).epsilon(1e-10));
  }
  SUBCASE("truncation error is controlled by the reported bound") {
    const double v0 = rmlmc_variance_oracle(fam, pmf, 0);
    const double v100 = rmlmc_variance_oracle(fam, pmf, 100);
    const double bound = rmlmc_variance_tail_bound(fam, pmf, 0);
    CHECK(std::abs(v100 - v0) <= bound * (1.0 + 1e-12));
    CHECK(rmlmc_variance_tail_bound(fam, pmf, 100) <= bound);
  }
  SUBCASE("empirical variance of many draws is close") {
    const double oracle = rmlmc_variance_oracle(fam, pmf, 400);
    const int n = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      RngStream s(23, parmc::lane_of(0, i));
      const double w = rmlmc_sample(fam, pmf, s).value;
      sum += w;
      sum2 += w * w;
    }
    const double emp = (sum2 - sum * sum / n) / (n - 1);
    CHECK(std::abs(emp - oracle) / oracle <= 0.05);
  }
  SUBCASE("diverging pairs are rejected") {
    CHECK_THROWS_AS(rmlmc_variance_oracle(fam, LevelPmf::geometric(0.2), 50),
                    DomainError);
  }
}

TEST_CASE("truncated level distribution") {
  SUBCASE("two-term normalization") {
    const LevelPmf pmf = truncated_pmf(2.0, 0.0, 1);
    CHECK(pmf.prob(0) == doctest::Approx(2.0 / 3.0));
    CHECK(pmf.prob(1) == doctest::Approx(1.0 / 3.0));
    CHECK(pmf.prob(2) == 0.0);
  }
  SUBCASE("single level") {
    const LevelPmf pmf = truncated_pmf(2.0, 1.0, 0);
    CHECK(pmf.prob(0) == 1.0);
  }
  SUBCASE("mass sums to one exactly") {
    const LevelPmf pmf = truncated_pmf(1.9, 0.3, 7);
    double sum = 0.0;
    for (std::uint64_t n = 0; n <= 7; ++n) sum += pmf.prob(n);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("truncated estimator") {
  const LevelFamily det = synthetic_family(1.0, 2.0, 1.0, 0.0, 1.0);
  SUBCASE("level-zero truncation returns the base level") {
    const LevelPmf pmf = truncated_pmf(2.0, 1.0, 0);
    RngStream s(4, 0);
    const CostedSample w = truncated_sample(det, pmf, s);
    CHECK(w.value == doctest::Approx(det.mean_delta(0)));
    CHECK(std::abs(det.partial_mean(0) - det.true_value()) ==
          doctest::Approx(std::exp2(-det.alpha())));
  }
  SUBCASE("cost never exceeds the deepest level") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const std::uint64_t levels = 4;
    const LevelPmf pmf = truncated_pmf(2.0, 1.0, levels);
    const std::uint64_t cap = fam.cost_ticks(levels);
    for (int i = 0; i < 5000; ++i) {
      RngStream s(25, parmc::lane_of(0, i));
      CHECK(truncated_sample(fam, pmf, s).cost <= cap);
    }
  }
  SUBCASE("rejects full-support pmfs") {
    RngStream s(5, 0);
    CHECK_THROWS_AS(truncated_sample(det, rmlmc_pmf(2.0, 1.0), s),
                    DomainError);
  }
  SUBCASE("mean matches the truncated partial sum, not the limit") {
    const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
    const std::uint64_t levels = 2;
    const LevelPmf pmf = truncated_pmf(2.0, 1.0, levels);
    const double target = fam.partial_mean(levels);
    const double var = rmlmc_variance_oracle(fam, pmf, 0);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      RngStream s(26, parmc::lane_of(0, i));
      sum += truncated_sample(fam, pmf, s).value;
    }
    const double se = std::sqrt(var / n);
    CHECK(std::abs(sum / n - target) <= 4.0 * se);
  }
}

TEST_CASE("bias identity for the truncated estimator, exact arithmetic") {
  // alpha = 1 keeps every partial sum an exact binary fraction.
  const LevelFamily fam = synthetic_family(1.0, 2.0, 1.0, 1.0, 1.0);
  for (double eps : {0.2, 0.1, 0.05, 0.025}) {
    const std::uint64_t levels = giles_levels(eps, fam.alpha(), fam.c1());
    double summed = 0.0;
    for (std::uint64_t l = 0; l <= levels; ++l) summed += fam.mean_delta(l);
    CHECK(summed == fam.partial_mean(levels));
    CHECK(std::abs(fam.partial_mean(levels) - 1.0) <= eps / 2.0);
  }
}

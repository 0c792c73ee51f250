#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "edgecache/bandit.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/types.hpp"
#include "edgecache/verify.hpp"
#include "edgecache/workload.hpp"

using namespace edgecache;

namespace {

SimConfig coverage_cfg(int F, int N, int c, SlotIndex T, int d, double theta_bound) {
  SimConfig cfg;
  cfg.num_files = F;
  cfg.num_nodes = N;
  cfg.cache_size = c;
  cfg.horizon = T;
  cfg.feature_dim = d;
  cfg.feature_window = d;
  cfg.theta_bound = theta_bound;
  cfg.policy = PolicyKind::ucb;
  cfg.seed = 3;
  return cfg;
}

Workload small_synthetic(int F, SlotIndex T, double theta_scale, double noise_range,
                         std::uint64_t seed) {
  SyntheticSpec spec;
  Eigen::VectorXd th(2);
  th << 0.6, 0.8;  // unit direction
  spec.theta_star = {th * theta_scale};
  spec.noise_range = noise_range;
  spec.clamp_at_zero = false;
  return Workload::from_synthetic(gen_synthetic(spec, F, T, seed));
}

}  // namespace

TEST_CASE("exhaustive selector returns maximal-sum subsets") {
  REQUIRE(brute_force_top_c({5.0, 3.0, 9.0}, 2) == std::vector<FileId>{0, 2});
  REQUIRE(brute_force_top_c({4.0, 4.0, 4.0}, 2) == std::vector<FileId>{0, 1});
  REQUIRE(brute_force_top_c({1.0, 2.0}, 0).empty());
  REQUIRE(brute_force_top_c({-5.0, -1.0, -3.0}, 1) == std::vector<FileId>{1});
  REQUIRE_THROWS_AS(brute_force_top_c(std::vector<double>(21, 0.0), 2), std::invalid_argument);
  REQUIRE_THROWS_AS(brute_force_top_c({1.0, 2.0}, 3), std::invalid_argument);
  REQUIRE_THROWS_AS(brute_force_top_c({1.0, std::nan("")}, 1), std::invalid_argument);

  SECTION("agrees with the sort-based selector on tie-heavy integer grids") {
    Rng rng(88);
    for (int trial = 0; trial < 300; ++trial) {
      const int F = 1 + static_cast<int>(rng.below(12));
      const int c = static_cast<int>(rng.below(static_cast<std::uint32_t>(F + 1)));
      std::vector<double> values(static_cast<std::size_t>(F));
      for (double& v : values) v = std::floor(rng.uniform(-3.0, 4.0));
      REQUIRE(brute_force_top_c(values, c) == top_c_by_value(values, c));
    }
  }
}

TEST_CASE("coverage predicate") {
  // With h = V * theta_star the estimate recovers theta_star (up to solver
  // noise), so no width can be strictly exceeded.
  NodeLearnerState s = init_state(2, 1.0);
  Eigen::VectorXd theta(2);
  theta << 0.7, -0.4;
  Eigen::VectorXd x1(2), x2(2);
  x1 << 1.0, 0.5;
  x2 << 0.2, 2.0;
  s.V += x1 * x1.transpose() + x2 * x2.transpose();
  refactor_inverse(s);
  s.h = s.V * theta;

  Eigen::VectorXd probe(2);
  probe << 1.0, 1.0;
  REQUIRE_FALSE(coverage_violates(s, probe, theta, 0.0, 1.0, 1.0));
  REQUIRE_FALSE(coverage_violates(s, Eigen::VectorXd::Zero(2), theta, 0.0, 1.0, 1.0));

  // Push the estimate off the truth: zero h means estimate 0, so the error at
  // the probe is |probe . theta| = 0.3 while a tiny width cannot cover it.
  s.h.setZero();
  REQUIRE(coverage_violates(s, probe, theta, 0.0, 0.01, 1.0));

  REQUIRE_THROWS_AS(coverage_violates(s, Eigen::VectorXd::Zero(3), theta, 0.0, 1.0, 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(coverage_violates(s, probe, theta, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("analytical bound values") {
  CoverageResult r;
  r.delta = 1.0;
  REQUIRE(r.analytical_bound() == Catch::Approx(0.2706705664732254).margin(1e-15));
  r.delta = 2.0;
  REQUIRE(r.analytical_bound() == Catch::Approx(0.0006709252558050237).margin(1e-15));
  r.delta = 0.0;
  REQUIRE(r.analytical_bound() == 2.0);  // vacuous below delta ~ 0.59
  r.trials = 4;
  r.violations = 1;
  REQUIRE(r.empirical_rate() == 0.25);
}

TEST_CASE("coverage audit over a simulated run") {
  const SimConfig cfg = coverage_cfg(10, 1, 3, 300, 2, 1.0);
  const Workload w = small_synthetic(10, 300, 1.0, 0.5, 17);

  SECTION("a huge delta is never violated") {
    const CoverageResult r = coverage_audit(cfg, w, 10.0);
    REQUIRE(r.trials == 3 * 300);
    REQUIRE(r.violations == 0);
  }

  SECTION("the empirical rate stays within the bound plus margin") {
    const CoverageResult r = coverage_audit(cfg, w, 1.0);
    const double limit = std::min(r.analytical_bound(), 1.0) + coverage_margin(r.analytical_bound(), r.trials);
    REQUIRE(r.empirical_rate() <= limit);
  }

  SECTION("prerequisites are enforced") {
    REQUIRE_THROWS_WITH(coverage_audit(cfg, Workload::from_trace(w.trace), 1.0),
                        "coverage_audit: workload has no ground truth");
    REQUIRE_THROWS_WITH(coverage_audit(coverage_cfg(10, 1, 3, 300, 2, 0.5), w, 1.0),
                        "coverage_audit: theta_bound smaller than the true parameter norm");
    Workload noisy = w;
    noisy.noise_range = 1.5;
    REQUIRE_THROWS_WITH(coverage_audit(cfg, noisy, 1.0),
                        "coverage_audit: noise range must be <= 1");
    REQUIRE_THROWS_AS(coverage_audit(cfg, w, -0.5), std::invalid_argument);
  }
}

TEST_CASE("coverage tallies pool across runs") {
  CoverageResult a;
  a.delta = 1.0;
  a.trials = 100;
  a.violations = 3;
  CoverageResult b;
  b.delta = 1.0;
  b.trials = 50;
  b.violations = 1;
  const CoverageResult merged = merge_coverage({a, b});
  REQUIRE(merged.trials == 150);
  REQUIRE(merged.violations == 4);
  REQUIRE(merged.delta == 1.0);

  b.delta = 2.0;
  REQUIRE_THROWS_AS(merge_coverage({a, b}), std::invalid_argument);
  REQUIRE_THROWS_AS(merge_coverage({}), std::invalid_argument);
}

TEST_CASE("coverage margin") {
  REQUIRE(coverage_margin(0.2706705664732254, 10000) ==
          Catch::Approx(0.033329186390266274).margin(1e-12));
  REQUIRE(coverage_margin(2.0, 10000) == 0.02);  // vacuous bounds clamp to p = 1
  REQUIRE_THROWS_AS(coverage_margin(0.5, 0), std::invalid_argument);
}

TEST_CASE("average-regret slope diagnostic") {
  auto series = [](std::vector<double> cum) {
    RunReport r;
    r.cum_regret = std::move(cum);
    return r;
  };

  SECTION("a zero-regret run is flat, not decreasing") {
    const SlopeResult r = regret_slope_check({series({0, 0, 0, 0})}, {2, 4});
    REQUIRE(r.checkpoints[0].second == 0.0);
    REQUIRE(r.checkpoints[1].second == 0.0);
    REQUIRE(r.monotone_fraction == 0.0);
  }

  SECTION("a constant per-slot gap keeps the average flat") {
    const SlopeResult r = regret_slope_check({series({2, 4, 6, 8})}, {1, 2, 4});
    for (const auto& [t, v] : r.checkpoints) REQUIRE(v == 2.0);
    REQUIRE(r.monotone_fraction == 0.0);
  }

  SECTION("square-root growth shows a strictly falling average") {
    std::vector<double> cum;
    for (int t = 1; t <= 100; ++t) cum.push_back(std::sqrt(static_cast<double>(t)));
    const SlopeResult r = regret_slope_check({series(cum)}, {10, 50, 100});
    REQUIRE(r.monotone_fraction == 1.0);
    REQUIRE(r.checkpoints[0].second == Catch::Approx(1.0 / std::sqrt(10.0)).margin(1e-12));
    REQUIRE(r.checkpoints[2].second == Catch::Approx(0.1).margin(1e-12));
  }

  SECTION("averaging pools across runs") {
    const SlopeResult r = regret_slope_check({series({4, 4}), series({0, 0})}, {2});
    REQUIRE(r.checkpoints[0].second == 1.0);  // mean cum 2 over t = 2
    REQUIRE(r.monotone_fraction == 1.0);      // single checkpoint: vacuous
  }

  SECTION("validation") {
    REQUIRE_THROWS_AS(regret_slope_check({}, {1}), std::invalid_argument);
    REQUIRE_THROWS_AS(regret_slope_check({series({1, 2})}, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(regret_slope_check({series({1, 2})}, {3}), std::invalid_argument);
    REQUIRE_THROWS_AS(regret_slope_check({series({1, 2})}, {2, 2}), std::invalid_argument);
    REQUIRE_THROWS_AS(regret_slope_check({series({1, 2})}, {2, 1}), std::invalid_argument);
  }
}

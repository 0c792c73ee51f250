// Acceptance gate: eight end-to-end checks with pinned tolerances, one
// pass/fail line each. Exits nonzero if any check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "edgecache/edgecache.hpp"

using namespace edgecache;

namespace {

struct Criterion {
  std::string name;
  std::function<std::pair<bool, std::string>()> body;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Shared convergence study reused by the sublinear-regret and
// estimate-convergence checks: ucb on a well-separated ground-truth workload.
struct ConvergenceStudy {
  std::vector<RunReport> reports;
  std::vector<double> err_at_100;   // per (seed, node): ||estimate - truth|| after 100 updates
  std::vector<double> err_at_5000;  // same after 5000 updates
};

const ConvergenceStudy& convergence_study() {
  static const ConvergenceStudy study = [] {
    ExperimentConfig cfg;
    cfg.base.num_files = 50;
    cfg.base.num_nodes = 3;
    cfg.base.cache_size = 5;
    cfg.base.horizon = 5000;
    cfg.base.feature_dim = 5;
    cfg.base.feature_window = 5;
    cfg.base.ridge_lambda = 1.0;
    cfg.theta_bound_auto = true;
    cfg.policies = {PolicyKind::ucb};
    cfg.workload.kind = WorkloadConfig::Kind::synthetic;
    cfg.workload.synthetic.noise_range = 0.5;
    cfg.workload.synthetic.clamp_at_zero = false;
    cfg.workload.theta_norm = 6.0;
    for (std::uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);

    const WorkloadFactory factory{cfg};
    ConvergenceStudy study;
    for (std::uint64_t seed : cfg.seeds) {
      const Workload w = factory.make(seed);
      const SimConfig sc = resolve_sim_config(cfg, w, "synthetic", PolicyKind::ucb, seed);
      RunHooks hooks;
      hooks.after_update = [&study, &w](NodeId n, const NodeLearnerState& s) {
        if (s.updates_applied == 100) {
          study.err_at_100.push_back((estimate_theta(s) - w.theta_star[n]).norm());
        } else if (s.updates_applied == 5000) {
          study.err_at_5000.push_back((estimate_theta(s) - w.theta_star[n]).norm());
        }
      };
      study.reports.push_back(run(sc, w, hooks));
    }
    return study;
  }();
  return study;
}

// 1. Average per-slot regret must at least halve between early and final checkpoints.
std::pair<bool, std::string> check_sublinear_regret() {
  const ConvergenceStudy& study = convergence_study();
  const SlopeResult slope = regret_slope_check(study.reports, {500, 5000});
  const double early = slope.checkpoints.front().second;
  const double late = slope.checkpoints.back().second;
  const bool ok = early > 0.0 && late <= 0.5 * early;
  std::ostringstream msg;
  msg << "mean regret/slot " << fmt(early) << " @t=500 -> " << fmt(late)
      << " @t=5000 over 20 seeds (need <= 0.5x)";
  return {ok, msg.str()};
}

// 2. Confidence-interval misses must stay within the analytical bound plus margin.
std::pair<bool, std::string> check_coverage() {
  ExperimentConfig cfg;
  cfg.base.num_files = 50;
  cfg.base.num_nodes = 3;
  cfg.base.cache_size = 5;
  cfg.base.horizon = 700;
  cfg.base.feature_dim = 5;
  cfg.base.feature_window = 5;
  cfg.base.ridge_lambda = 1.0;
  cfg.theta_bound_auto = true;
  cfg.policies = {PolicyKind::ucb};
  cfg.seeds = {1, 2, 3};
  cfg.workload.kind = WorkloadConfig::Kind::synthetic;
  cfg.workload.synthetic.noise_range = 0.5;
  cfg.workload.synthetic.clamp_at_zero = false;
  cfg.workload.theta_norm = 2.0;

  const WorkloadFactory factory{cfg};
  bool ok = true;
  std::ostringstream msg;
  for (double delta : {1.0, 2.0}) {
    std::vector<CoverageResult> parts;
    for (std::uint64_t seed : cfg.seeds) {
      const Workload w = factory.make(seed);
      const SimConfig sc = resolve_sim_config(cfg, w, "synthetic", PolicyKind::ucb, seed);
      parts.push_back(coverage_audit(sc, w, delta));
    }
    const CoverageResult total = merge_coverage(parts);
    const double bound = std::min(total.analytical_bound(), 1.0);
    const double margin = coverage_margin(total.analytical_bound(), total.trials);
    const bool this_ok = total.trials >= 10000 && total.empirical_rate() <= bound + margin;
    ok = ok && this_ok;
    if (delta != 1.0) msg << "; ";
    msg << "delta=" << fmt(delta) << ": rate " << fmt(total.empirical_rate()) << " ("
        << total.violations << "/" << total.trials << ") vs bound " << fmt(bound) << "+"
        << fmt(margin);
  }
  return {ok, msg.str()};
}

// 3. Ranked selection, exhaustive enumeration, and the per-slot oracle agree exactly.
std::pair<bool, std::string> check_selection_agreement() {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int F = 2 + static_cast<int>(rng.below(7));  // 2..8 files
    const int c = std::min(3, static_cast<int>(rng.below(static_cast<std::uint32_t>(F + 1))));
    std::vector<double> values(static_cast<std::size_t>(F));
    for (double& v : values) v = std::floor(rng.uniform(-4.0, 5.0));  // ties and negatives

    const std::vector<FileId> brute = brute_force_top_c(values, c);
    if (top_c_by_value(values, c) != brute) {
      return {false, "sort-based selection diverged on trial " + std::to_string(trial)};
    }

    std::vector<Score> scores;
    for (int f = 0; f < F; ++f) {
      scores.push_back(Score{static_cast<FileId>(f), values[static_cast<std::size_t>(f)], 0.0,
                             values[static_cast<std::size_t>(f)]});
    }
    rng.shuffle(scores);
    if (select_top_c(scores, c) != brute) {
      return {false, "score selection diverged on trial " + std::to_string(trial)};
    }

    Trace t = Trace::zeros(F, 1, 1, "acceptance");
    for (int f = 0; f < F; ++f) t.at(static_cast<FileId>(f), 0, 1) = values[static_cast<std::size_t>(f)];
    if (hindsight_per_slot(t, c)[0][0] != brute) {
      return {false, "per-slot oracle diverged on trial " + std::to_string(trial)};
    }
    ++checked;
  }
  return {true, std::to_string(checked) + " random instances, three-way exact agreement"};
}

// 4. On the benchmark preset, the policy ordering must hold on 10-seed means.
std::pair<bool, std::string> check_policy_ordering() {
  const ExperimentConfig cfg = preset_config("fig3");
  const WorkloadFactory factory{cfg};

  double oracle_mean = 0.0;
  double ucb_mean = 0.0, greedy_mean = 0.0, random_mean = 0.0;
  const double num_seeds = static_cast<double>(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    const Workload w = factory.make(seed);
    for (PolicyKind p : {PolicyKind::ucb, PolicyKind::ridge_greedy, PolicyKind::random}) {
      const SimConfig sc = resolve_sim_config(cfg, w, "zipf", p, seed);
      const RunReport rep = run(sc, w);
      const double hits = rep.final_hits();
      if (p == PolicyKind::ucb) {
        ucb_mean += hits / num_seeds;
        oracle_mean += (rep.final_hits() + rep.final_regret()) / num_seeds;
      } else if (p == PolicyKind::ridge_greedy) {
        greedy_mean += hits / num_seeds;
      } else {
        random_mean += hits / num_seeds;
      }
    }
  }

  const bool ok = oracle_mean >= ucb_mean && ucb_mean > greedy_mean &&
                  greedy_mean > random_mean && ucb_mean >= 1.2 * random_mean;
  std::ostringstream msg;
  msg << "mean hits: per-slot oracle " << fmt(oracle_mean) << " >= ucb " << fmt(ucb_mean)
      << " > ridge_greedy " << fmt(greedy_mean) << " > random " << fmt(random_mean)
      << "; ucb/random " << fmt(ucb_mean / random_mean) << " (need >= 1.2)";
  return {ok, msg.str()};
}

// 5. On the saturation preset, growing the cache from 30 to 70 barely helps
//    the hindsight-static benchmark (demand concentrates on a short head).
std::pair<bool, std::string> check_cache_saturation() {
  const ExperimentConfig cfg = preset_config("saturation");
  const WorkloadFactory factory{cfg};
  double mean_30 = 0.0, mean_70 = 0.0;
  const double num_seeds = static_cast<double>(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    const Trace& trace = factory.make(seed).trace;
    mean_30 += static_sets_hits(trace, hindsight_static(trace, 30)) / num_seeds;
    mean_70 += static_sets_hits(trace, hindsight_static(trace, 70)) / num_seeds;
  }
  const double ratio = mean_70 / mean_30;
  const bool ok = mean_30 > 0.0 && mean_70 > mean_30 && ratio <= 1.15;
  std::ostringstream msg;
  msg << "hindsight-static mean hits: c=30 " << fmt(mean_30) << ", c=70 " << fmt(mean_70)
      << ", ratio " << fmt(ratio) << " (need in (1, 1.15])";
  return {ok, msg.str()};
}

// 6. Per-node parameter estimates must tighten five-fold between updates 100 and 5000.
std::pair<bool, std::string> check_estimate_convergence() {
  const ConvergenceStudy& study = convergence_study();
  if (study.err_at_100.size() != 60 || study.err_at_5000.size() != 60) {
    return {false, "expected 60 capture points per checkpoint (20 seeds x 3 nodes)"};
  }
  const double early = median(study.err_at_100);
  const double late = median(study.err_at_5000);
  const bool ok = early > 0.0 && late <= 0.2 * early;
  std::ostringstream msg;
  msg << "median ||estimate - truth||: " << fmt(early) << " after 100 updates -> " << fmt(late)
      << " after 5000 (need <= 0.2x)";
  return {ok, msg.str()};
}

// 7. The benchmark preset must reproduce byte-identical artifacts across
//    reruns and thread counts.
std::pair<bool, std::string> check_reproducibility() {
  ExperimentConfig cfg = preset_config("fig3");
  cfg.output_dir = "acceptance_tmp/repro_a";
  cfg.jobs = 1;
  const SweepResult a = run_experiment(cfg);
  cfg.output_dir = "acceptance_tmp/repro_b";
  cfg.jobs = 4;
  const SweepResult b = run_experiment(cfg);

  if (a.outcomes.size() != b.outcomes.size()) return {false, "run counts diverged"};
  int compared = 0;
  for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
    if (read_text_file(a.outcomes[i].csv_path) != read_text_file(b.outcomes[i].csv_path)) {
      return {false, "per-run csv diverged: " + a.outcomes[i].csv_path};
    }
    ++compared;
  }
  if (read_text_file("acceptance_tmp/repro_a/summary.csv") !=
      read_text_file("acceptance_tmp/repro_b/summary.csv")) {
    return {false, "summary.csv diverged between reruns"};
  }
  return {true, std::to_string(compared) + " run csvs + summary byte-identical across jobs=1 and jobs=4"};
}

// 8. Hand-checkable micro values, pinned tight.
std::pair<bool, std::string> check_micro_values() {
  const double tol = 1e-9;
  std::ostringstream msg;

  const double a1 = alpha(1, 100, 1.0, 1.0);
  const double a2 = alpha(100, 100, 0.5, 2.0);
  if (std::abs(a1 - 2.5174271293851467) > 1e-12) {
    return {false, "exploration scale (t=1, F=100, 1, 1): got " + std::to_string(a1)};
  }
  if (std::abs(a2 - 3.628260884878466) > 1e-12) {
    return {false, "exploration scale (t=100, F=100, 0.5, 2): got " + std::to_string(a2)};
  }

  // Two orthogonal unit updates leave an exactly halved inverse, so every
  // downstream quantity is hand-computable.
  NodeLearnerState s = init_state(2, 1.0);
  Eigen::VectorXd e1(2), e2(2), probe(2);
  e1 << 1.0, 0.0;
  e2 << 0.0, 1.0;
  probe << 1.0, 1.0;
  update(s, e1, 2.0);
  update(s, e2, 4.0);
  const Eigen::VectorXd est = estimate_theta(s);
  if (std::abs(est[0] - 1.0) > tol || std::abs(est[1] - 2.0) > tol) {
    return {false, "ridge estimate: expected (1, 2), got (" + std::to_string(est[0]) + ", " +
                       std::to_string(est[1]) + ")"};
  }
  if (std::abs(predict(s, probe) - 3.0) > tol) {
    return {false, "prediction at (1,1): expected 3, got " + std::to_string(predict(s, probe))};
  }
  if (std::abs(perturbation(s, probe, 1.0) - 1.0) > tol) {
    return {false, "width at (1,1): expected 1, got " + std::to_string(perturbation(s, probe, 1.0))};
  }

  const std::vector<FileId> picked = top_c_by_value({5.0, 3.0, 9.0, 9.0}, 2);
  if (picked != std::vector<FileId>{2, 3} || brute_force_top_c({5.0, 3.0, 9.0, 9.0}, 2) != picked) {
    return {false, "tied selection: expected {2, 3}"};
  }

  msg << "exploration scales, 2d ridge sequence, prediction/width, tied selection all within "
      << fmt(tol) << " (scales 1e-12)";
  return {true, msg.str()};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"sublinear-regret", check_sublinear_regret},
      {"confidence-coverage", check_coverage},
      {"selection-agreement", check_selection_agreement},
      {"policy-ordering", check_policy_ordering},
      {"cache-saturation", check_cache_saturation},
      {"estimate-convergence", check_estimate_convergence},
      {"reproducibility", check_reproducibility},
      {"micro-values", check_micro_values},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
      std::tie(pass, detail) = criteria[i].body();
    } catch (const std::exception& e) {
      pass = false;
      detail = std::string("exception: ") + e.what();
    }
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "[" << (i + 1) << "/8] " << criteria[i].name << ": "
              << (pass ? "PASS" : "FAIL") << " - " << detail << " [" << fmt(sec) << "s]"
              << std::endl;
    if (!pass) ++failures;
  }

  if (failures == 0) {
    std::cout << "all 8 acceptance checks passed" << std::endl;
    return 0;
  }
  std::cout << failures << " acceptance check(s) failed" << std::endl;
  return 1;
}

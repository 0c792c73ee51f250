#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/bandit.hpp"
#include "edgecache/engine.hpp"
#include "edgecache/types.hpp"
#include "edgecache/workload.hpp"

namespace edgecache {

// Tally of confidence-interval violations observed across learner updates.
struct CoverageResult {
  double delta = 0.0;
  long long trials = 0;
  long long violations = 0;

  double empirical_rate() const {
    return trials == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(trials);
  }
  // The probability bound on a violation: 2 * exp(-2 * delta^2). Exceeds 1
  // (vacuous) for small delta.
  double analytical_bound() const { return 2.0 * std::exp(-2.0 * delta * delta); }
};

// The event the coverage bound controls: the estimate's error at x exceeds
// (delta + theta_bound * ridge_lambda) * sqrt(x^T V_inv x).
inline bool coverage_violates(const NodeLearnerState& s, const FeatureVector& x,
                              const Eigen::VectorXd& theta_star, double delta, double theta_bound,
                              double ridge_lambda) {
  if (x.size() != s.h.size() || theta_star.size() != s.h.size()) {
    throw std::invalid_argument("coverage_violates: dimension mismatch");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("coverage_violates: delta must be >= 0");
  const double err = std::abs(x.dot(estimate_theta(s)) - x.dot(theta_star));
  const double width =
      (delta + theta_bound * ridge_lambda) * std::sqrt(std::max(0.0, x.dot(s.V_inv * x)));
  return err > width;
}

// Runs the configured simulation and, immediately before every learner
// update, checks the confidence interval against the workload's ground
// truth. Requires a synthetic workload (known theta_star) whose noise range
// stays within the bound's assumption, and a theta_bound that actually
// covers the true parameter norms.
inline CoverageResult coverage_audit(const SimConfig& config, const Workload& workload,
                                     double delta) {
  if (!workload.has_ground_truth()) {
    throw std::invalid_argument("coverage_audit: workload has no ground truth");
  }
  if (!(delta >= 0.0)) throw std::invalid_argument("coverage_audit: delta must be >= 0");
  if (workload.noise_range > 1.0) {
    throw std::invalid_argument("coverage_audit: noise range must be <= 1");
  }
  double max_norm = 0.0;
  for (const auto& th : workload.theta_star) max_norm = std::max(max_norm, th.norm());
  if (config.theta_bound + 1e-9 < max_norm) {
    throw std::invalid_argument("coverage_audit: theta_bound smaller than the true parameter norm");
  }

  CoverageResult res;
  res.delta = delta;
  RunHooks hooks;
  hooks.before_update = [&res, &workload, &config](NodeId n, const NodeLearnerState& s,
                                                   const FeatureVector& x, Demand) {
    ++res.trials;
    if (coverage_violates(s, x, workload.theta_star[n], res.delta, config.theta_bound,
                          config.ridge_lambda)) {
      ++res.violations;
    }
  };
  run(config, workload, hooks);
  return res;
}

// Pools tallies from runs checked at the same delta.
inline CoverageResult merge_coverage(const std::vector<CoverageResult>& parts) {
  if (parts.empty()) throw std::invalid_argument("merge_coverage: no parts");
  CoverageResult total;
  total.delta = parts.front().delta;
  for (const CoverageResult& p : parts) {
    if (p.delta != total.delta) throw std::invalid_argument("merge_coverage: mixed deltas");
    total.trials += p.trials;
    total.violations += p.violations;
  }
  return total;
}

// Slack allowed when comparing an empirical rate to its analytical bound:
// three binomial standard errors at the bound plus a 0.02 floor. The bound
// is clamped to 1 first (small deltas make it vacuous).
inline double coverage_margin(double analytical_bound, long long trials) {
  if (trials < 1) throw std::invalid_argument("coverage_margin: trials must be >= 1");
  const double p = std::min(analytical_bound, 1.0);
  return 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials)) + 0.02;
}

inline nlohmann::json coverage_to_json(const CoverageResult& r) {
  return nlohmann::json{
      {"delta", r.delta},
      {"trials", r.trials},
      {"violations", r.violations},
      {"empirical_rate", r.empirical_rate()},
      {"analytical_bound", r.analytical_bound()},
  };
}

// --- average-regret slope diagnostic ---------------------------------------------

struct SlopeResult {
  std::vector<std::pair<SlotIndex, double>> checkpoints;  // (t, mean R(t)/t over runs)
  double monotone_fraction = 0.0;  // consecutive checkpoint pairs that strictly decreased
};

// Evaluates mean R(t)/t at the given checkpoints across runs. A learner whose
// average regret flattens out shows up as a high monotone fraction and a
// falling series; a constant per-slot gap keeps R(t)/t flat instead.
inline SlopeResult regret_slope_check(const std::vector<RunReport>& reports,
                                      const std::vector<SlotIndex>& checkpoints) {
  if (reports.empty()) throw std::invalid_argument("regret_slope_check: no runs given");
  if (checkpoints.empty()) throw std::invalid_argument("regret_slope_check: no checkpoints given");
  SlotIndex min_horizon = std::numeric_limits<SlotIndex>::max();
  for (const RunReport& r : reports) {
    min_horizon = std::min(min_horizon, static_cast<SlotIndex>(r.cum_regret.size()));
  }
  SlotIndex prev = 0;
  for (SlotIndex t : checkpoints) {
    if (t <= prev) throw std::invalid_argument("regret_slope_check: checkpoints must be strictly increasing");
    if (t > min_horizon) throw std::invalid_argument("regret_slope_check: checkpoint beyond horizon");
    prev = t;
  }

  SlopeResult res;
  res.checkpoints.reserve(checkpoints.size());
  for (SlotIndex t : checkpoints) {
    double sum = 0.0;
    for (const RunReport& r : reports) sum += r.cum_regret[static_cast<std::size_t>(t - 1)];
    res.checkpoints.emplace_back(t, sum / static_cast<double>(reports.size()) / static_cast<double>(t));
  }
  if (res.checkpoints.size() < 2) {
    res.monotone_fraction = 1.0;  // vacuously monotone
  } else {
    int decreasing = 0;
    for (std::size_t i = 1; i < res.checkpoints.size(); ++i) {
      if (res.checkpoints[i].second < res.checkpoints[i - 1].second) ++decreasing;
    }
    res.monotone_fraction =
        static_cast<double>(decreasing) / static_cast<double>(res.checkpoints.size() - 1);
  }
  return res;
}

inline nlohmann::json slope_to_json(const SlopeResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& [t, v] : r.checkpoints) pts.push_back(nlohmann::json{{"t", t}, {"avg_regret", v}});
  return nlohmann::json{{"checkpoints", std::move(pts)}, {"monotone_fraction", r.monotone_fraction}};
}

// --- independent selection oracle -------------------------------------------------

// Exhaustive subset enumeration, deliberately sharing no code with the
// sort-based selector it cross-checks. Subsets are visited in lexicographic
// order and replaced only on a strictly larger sum, so ties resolve to the
// lexicographically smallest set.
inline std::vector<FileId> brute_force_top_c(const std::vector<double>& values, int c) {
  const int F = static_cast<int>(values.size());
  if (F > 20) {
    throw std::invalid_argument("brute_force_top_c: catalog too large for enumeration (max 20)");
  }
  if (c < 0 || c > F) throw std::invalid_argument("brute_force_top_c: c out of range");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("brute_force_top_c: non-finite value");
  }
  if (c == 0) return {};

  std::vector<int> idx(static_cast<std::size_t>(c));
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<FileId> best;
  double best_sum = -std::numeric_limits<double>::infinity();
  while (true) {
    double sum = 0.0;
    for (int i : idx) sum += values[static_cast<std::size_t>(i)];
    if (sum > best_sum) {
      best_sum = sum;
      best.assign(idx.begin(), idx.end());
    }
    int i = c - 1;
    while (i >= 0 && idx[static_cast<std::size_t>(i)] == F - c + i) --i;
    if (i < 0) break;
    ++idx[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < c; ++j) {
      idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  return best;
}

}  // namespace edgecache

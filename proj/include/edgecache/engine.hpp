#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/bandit.hpp"
#include "edgecache/features.hpp"
#include "edgecache/io_util.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/types.hpp"
#include "edgecache/workload.hpp"

namespace edgecache {

struct SlotResult {
  SlotIndex slot = 0;
  std::vector<std::vector<FileId>> cached;  // per node, ascending ids, exactly cache_size each
  std::vector<double> hits;                 // per node: demand mass of the cached files
  std::vector<double> oracle_hits;          // per node: best demand mass any set could get
};

struct RunReport {
  SimConfig config;
  std::vector<std::vector<FileId>> initial_sets;  // random per-node sets drawn before slot 1
  std::vector<SlotResult> slots;
  std::vector<double> cum_hits;    // cumulative over slots, summed across nodes
  std::vector<double> cum_regret;  // cumulative per-slot-oracle shortfall, across nodes
  double max_feature_norm = 0.0;   // largest feature norm the learners consumed
  double wall_clock_sec = 0.0;

  double final_hits() const { return cum_hits.empty() ? 0.0 : cum_hits.back(); }
  double final_regret() const { return cum_regret.empty() ? 0.0 : cum_regret.back(); }
};

// Observation taps for verification: both fire once per applied update.
struct RunHooks {
  std::function<void(NodeId, const NodeLearnerState&, const FeatureVector&, Demand)> before_update;
  std::function<void(NodeId, const NodeLearnerState&)> after_update;
};

// [node][slot-1] -> the cache set maximizing that slot's demand mass.
using PerSlotSets = std::vector<std::vector<std::vector<FileId>>>;

inline PerSlotSets hindsight_per_slot(const Trace& trace, int cache_size) {
  trace.validate();
  if (cache_size < 0 || cache_size > trace.num_files) {
    throw std::invalid_argument("hindsight_per_slot: cache_size out of range");
  }
  PerSlotSets sets(static_cast<std::size_t>(trace.num_nodes));
  std::vector<double> column(static_cast<std::size_t>(trace.num_files));
  for (int n = 0; n < trace.num_nodes; ++n) {
    sets[static_cast<std::size_t>(n)].reserve(static_cast<std::size_t>(trace.horizon));
    for (SlotIndex t = 1; t <= trace.horizon; ++t) {
      for (int f = 0; f < trace.num_files; ++f) {
        column[static_cast<std::size_t>(f)] =
            trace.demand(static_cast<FileId>(f), static_cast<NodeId>(n), t);
      }
      sets[static_cast<std::size_t>(n)].push_back(top_c_by_value(column, cache_size));
    }
  }
  return sets;
}

// Per node, the single set maximizing whole-horizon demand mass.
inline std::vector<std::vector<FileId>> hindsight_static(const Trace& trace, int cache_size) {
  trace.validate();
  if (cache_size < 0 || cache_size > trace.num_files) {
    throw std::invalid_argument("hindsight_static: cache_size out of range");
  }
  std::vector<std::vector<FileId>> sets(static_cast<std::size_t>(trace.num_nodes));
  std::vector<double> totals(static_cast<std::size_t>(trace.num_files));
  for (int n = 0; n < trace.num_nodes; ++n) {
    for (int f = 0; f < trace.num_files; ++f) {
      double sum = 0.0;
      for (SlotIndex t = 1; t <= trace.horizon; ++t) {
        sum += trace.demand(static_cast<FileId>(f), static_cast<NodeId>(n), t);
      }
      totals[static_cast<std::size_t>(f)] = sum;
    }
    sets[static_cast<std::size_t>(n)] = top_c_by_value(totals, cache_size);
  }
  return sets;
}

inline double slot_set_mass(const Trace& trace, NodeId n, SlotIndex t,
                            const std::vector<FileId>& files) {
  double sum = 0.0;
  for (FileId f : files) sum += trace.demand(f, n, t);
  return sum;
}

// Whole-horizon demand mass captured by fixed per-node sets.
inline double static_sets_hits(const Trace& trace, const std::vector<std::vector<FileId>>& sets) {
  if (sets.size() != static_cast<std::size_t>(trace.num_nodes)) {
    throw std::invalid_argument("static_sets_hits: one set per node required");
  }
  double sum = 0.0;
  for (int n = 0; n < trace.num_nodes; ++n) {
    for (SlotIndex t = 1; t <= trace.horizon; ++t) {
      sum += slot_set_mass(trace, static_cast<NodeId>(n), t, sets[static_cast<std::size_t>(n)]);
    }
  }
  return sum;
}

// Whole-horizon demand mass captured by per-slot sets (the per-slot oracle's own score).
inline double per_slot_sets_hits(const Trace& trace, const PerSlotSets& sets) {
  if (sets.size() != static_cast<std::size_t>(trace.num_nodes)) {
    throw std::invalid_argument("per_slot_sets_hits: one row per node required");
  }
  double sum = 0.0;
  for (int n = 0; n < trace.num_nodes; ++n) {
    const auto& row = sets[static_cast<std::size_t>(n)];
    if (row.size() != static_cast<std::size_t>(trace.horizon)) {
      throw std::invalid_argument("per_slot_sets_hits: one set per slot required");
    }
    for (SlotIndex t = 1; t <= trace.horizon; ++t) {
      sum += slot_set_mass(trace, static_cast<NodeId>(n), t, row[static_cast<std::size_t>(t - 1)]);
    }
  }
  return sum;
}

// Re-derives the cumulative regret series from recorded cache decisions and
// oracle sets; an independent accounting path used to cross-check run().
inline std::vector<double> compute_regret(const Trace& trace,
                                          const std::vector<SlotResult>& slots,
                                          const PerSlotSets& oracle_sets) {
  std::vector<double> cum;
  cum.reserve(slots.size());
  double total = 0.0;
  for (const SlotResult& sr : slots) {
    double shortfall = 0.0;
    for (int n = 0; n < trace.num_nodes; ++n) {
      const double policy = slot_set_mass(trace, static_cast<NodeId>(n), sr.slot,
                                          sr.cached[static_cast<std::size_t>(n)]);
      const double best =
          slot_set_mass(trace, static_cast<NodeId>(n), sr.slot,
                        oracle_sets[static_cast<std::size_t>(n)][static_cast<std::size_t>(sr.slot - 1)]);
      shortfall += best - policy;
    }
    total += shortfall;
    cum.push_back(total);
  }
  return cum;
}

// One full simulation: per slot and node, score the catalog, cache the top-c,
// collect the cached files' demands, update that node's learner from exactly
// those files (ascending FileId), then record the slot's demands into the
// history (all files by default; only cached ones under strict_bandit).
//
// Features come from the workload's exogenous tensor when present, otherwise
// from `feature_map` (default: the demand-window map over the history).
inline RunReport run(const SimConfig& config, const Workload& workload, const RunHooks& hooks = {},
                     FeatureMap feature_map = {}) {
  const auto clock_start = std::chrono::steady_clock::now();
  config.validate();
  const Trace& trace = workload.trace;
  trace.validate();
  if (trace.num_files != config.num_files || trace.num_nodes != config.num_nodes ||
      trace.horizon != config.horizon) {
    throw std::invalid_argument("workload: trace dimensions disagree with config");
  }
  const bool exogenous = !workload.features.empty();
  if (exogenous) {
    if (workload.features.num_files() != config.num_files ||
        workload.features.num_nodes() != config.num_nodes ||
        workload.features.horizon() != config.horizon ||
        workload.features.feature_dim() != config.feature_dim) {
      throw std::invalid_argument("workload: feature tensor dimensions disagree with config");
    }
  } else if (!feature_map) {
    feature_map = demand_window_map(config.feature_window);
  }

  const int F = config.num_files;
  const int N = config.num_nodes;
  const int c = config.cache_size;

  RunReport rep;
  rep.config = config;

  Rng rng(config.seed);
  for (int n = 0; n < N; ++n) {
    rep.initial_sets.push_back(
        rng.sample_without_replacement(static_cast<std::uint32_t>(F), static_cast<std::uint32_t>(c)));
  }

  const PerSlotSets oracle = hindsight_per_slot(trace, c);

  DemandHistory history(F, N);
  std::vector<NodeLearnerState> states;
  states.reserve(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) states.push_back(init_state(config.feature_dim, config.ridge_lambda));

  std::vector<FeatureVector> xs(static_cast<std::size_t>(F));
  rep.slots.reserve(static_cast<std::size_t>(config.horizon));
  rep.cum_hits.reserve(static_cast<std::size_t>(config.horizon));
  rep.cum_regret.reserve(static_cast<std::size_t>(config.horizon));
  double running_hits = 0.0;
  double running_regret = 0.0;

  for (SlotIndex t = 1; t <= config.horizon; ++t) {
    SlotResult sr;
    sr.slot = t;
    sr.cached.resize(static_cast<std::size_t>(N));
    sr.hits.resize(static_cast<std::size_t>(N));
    sr.oracle_hits.resize(static_cast<std::size_t>(N));

    for (int n = 0; n < N; ++n) {
      const NodeId node = static_cast<NodeId>(n);
      for (int f = 0; f < F; ++f) {
        const FileId file = static_cast<FileId>(f);
        FeatureVector& x = xs[static_cast<std::size_t>(f)];
        if (exogenous) {
          x = workload.features.at(file, node, t);
        } else {
          x = feature_map(history, file, node, t);
          if (x.size() != config.feature_dim) {
            throw std::invalid_argument("feature map produced a vector of the wrong dimension");
          }
        }
        if (config.feature_norm_cap) x = cap_norm(x, *config.feature_norm_cap);
        rep.max_feature_norm = std::max(rep.max_feature_norm, x.norm());
      }

      const auto scores = score_all(states[static_cast<std::size_t>(n)], xs, t,
                                    config.theta_bound, config.ridge_lambda, config.policy, rng);
      std::vector<FileId> cached = select_top_c(scores, c);

      sr.hits[static_cast<std::size_t>(n)] = slot_set_mass(trace, node, t, cached);
      sr.oracle_hits[static_cast<std::size_t>(n)] = slot_set_mass(
          trace, node, t, oracle[static_cast<std::size_t>(n)][static_cast<std::size_t>(t - 1)]);

      for (FileId f : cached) {
        const Demand d = trace.demand(f, node, t);
        const FeatureVector& x = xs[static_cast<std::size_t>(f)];
        auto& state = states[static_cast<std::size_t>(n)];
        if (hooks.before_update) hooks.before_update(node, state, x, d);
        update(state, x, d);
        if (hooks.after_update) hooks.after_update(node, state);
      }
      sr.cached[static_cast<std::size_t>(n)] = std::move(cached);
    }

    for (int n = 0; n < N; ++n) {
      const NodeId node = static_cast<NodeId>(n);
      if (config.strict_bandit) {
        for (FileId f : sr.cached[static_cast<std::size_t>(n)]) {
          history.append(f, node, t, trace.demand(f, node, t));
        }
      } else {
        for (int f = 0; f < F; ++f) {
          const FileId file = static_cast<FileId>(f);
          history.append(file, node, t, trace.demand(file, node, t));
        }
      }
      running_hits += sr.hits[static_cast<std::size_t>(n)];
      running_regret += sr.oracle_hits[static_cast<std::size_t>(n)] - sr.hits[static_cast<std::size_t>(n)];
    }

    rep.cum_hits.push_back(running_hits);
    rep.cum_regret.push_back(running_regret);
    rep.slots.push_back(std::move(sr));
  }

  rep.wall_clock_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return rep;
}

// --- report serialization -------------------------------------------------------

inline nlohmann::json report_to_json(const RunReport& rep) {
  nlohmann::json slots = nlohmann::json::array();
  for (const SlotResult& sr : rep.slots) {
    slots.push_back(nlohmann::json{
        {"slot", sr.slot},
        {"cached", sr.cached},
        {"hits", sr.hits},
        {"oracle_hits", sr.oracle_hits},
    });
  }
  return nlohmann::json{
      {"config", sim_config_to_json(rep.config)},
      {"initial_sets", rep.initial_sets},
      {"slots", std::move(slots)},
      {"cum_hits", rep.cum_hits},
      {"cum_regret", rep.cum_regret},
      {"final_hits", rep.final_hits()},
      {"final_regret", rep.final_regret()},
      {"max_feature_norm", rep.max_feature_norm},
      {"wall_clock_sec", rep.wall_clock_sec},
  };
}

// Per-(slot, node) rows; cum_regret is the across-node series, repeated on
// each node row of its slot. Formatting is pinned so identical runs produce
// byte-identical files.
inline std::string report_to_csv(const RunReport& rep) {
  std::string out = "slot,node,hits,oracle_hits,cum_regret\n";
  for (std::size_t i = 0; i < rep.slots.size(); ++i) {
    const SlotResult& sr = rep.slots[i];
    for (std::size_t n = 0; n < sr.hits.size(); ++n) {
      out += std::to_string(sr.slot);
      out += ',';
      out += std::to_string(n);
      out += ',';
      out += format_double(sr.hits[n]);
      out += ',';
      out += format_double(sr.oracle_hits[n]);
      out += ',';
      out += format_double(rep.cum_regret[i]);
      out += '\n';
    }
  }
  return out;
}

}  // namespace edgecache

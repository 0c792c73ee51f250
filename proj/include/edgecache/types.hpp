#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace edgecache {

using FileId = std::uint32_t;    // content index, 0-based
using NodeId = std::uint32_t;    // edge-node index, 0-based
using SlotIndex = std::int64_t;  // decision slot, 1-based (slot 0 = before the run)
using Demand = double;           // per-slot request mass for one (file, node)
using FeatureVector = Eigen::VectorXd;

enum class PolicyKind { ucb, ridge_greedy, random };

inline std::string to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::ucb: return "ucb";
    case PolicyKind::ridge_greedy: return "ridge_greedy";
    case PolicyKind::random: return "random";
  }
  throw std::invalid_argument("unknown PolicyKind value");
}

inline PolicyKind policy_from_string(const std::string& s) {
  if (s == "ucb") return PolicyKind::ucb;
  if (s == "ridge_greedy") return PolicyKind::ridge_greedy;
  if (s == "random") return PolicyKind::random;
  throw std::invalid_argument("policy: '" + s + "' is not one of ucb, ridge_greedy, random");
}

// Append-only log of observed demands, one sequence per (file, node) pair.
// Slots within a pair must arrive strictly increasing; anything never
// recorded reads back as 0.
class DemandHistory {
 public:
  DemandHistory(int num_files, int num_nodes)
      : num_files_(num_files), num_nodes_(num_nodes) {
    if (num_files < 1 || num_nodes < 1) {
      throw std::invalid_argument("DemandHistory: num_files and num_nodes must be positive");
    }
    obs_.resize(static_cast<std::size_t>(num_files) * static_cast<std::size_t>(num_nodes));
  }

  int num_files() const { return num_files_; }
  int num_nodes() const { return num_nodes_; }

  void append(FileId f, NodeId n, SlotIndex slot, Demand value) {
    auto& seq = obs_[index(f, n)];
    if (slot < 1) throw std::invalid_argument("DemandHistory::append: slot must be >= 1");
    if (!seq.empty() && slot <= seq.back().first) {
      throw std::invalid_argument("DemandHistory::append: slots must be strictly increasing");
    }
    if (!std::isfinite(value)) {
      throw std::invalid_argument("DemandHistory::append: demand must be finite");
    }
    seq.emplace_back(slot, value);
  }

  // Demand recorded for (f, n) at `slot`; 0 when nothing was recorded there.
  Demand at(FileId f, NodeId n, SlotIndex slot) const {
    const auto& seq = obs_[index(f, n)];
    auto it = std::lower_bound(
        seq.begin(), seq.end(), slot,
        [](const std::pair<SlotIndex, Demand>& e, SlotIndex s) { return e.first < s; });
    if (it != seq.end() && it->first == slot) return it->second;
    return 0.0;
  }

  // Highest slot recorded for (f, n); 0 when the sequence is empty.
  SlotIndex last_slot(FileId f, NodeId n) const {
    const auto& seq = obs_[index(f, n)];
    return seq.empty() ? 0 : seq.back().first;
  }

  std::size_t total_observations() const {
    std::size_t total = 0;
    for (const auto& seq : obs_) total += seq.size();
    return total;
  }

 private:
  std::size_t index(FileId f, NodeId n) const {
    if (f >= static_cast<FileId>(num_files_) || n >= static_cast<NodeId>(num_nodes_)) {
      throw std::invalid_argument("DemandHistory: file or node index out of range");
    }
    return static_cast<std::size_t>(f) * static_cast<std::size_t>(num_nodes_) + n;
  }

  int num_files_;
  int num_nodes_;
  std::vector<std::vector<std::pair<SlotIndex, Demand>>> obs_;
};

// Static parameters of one simulation run.
struct SimConfig {
  int num_files = 0;       // catalog size F
  int num_nodes = 0;       // edge nodes
  int cache_size = 0;      // files cached per node per slot
  SlotIndex horizon = 0;   // number of decision slots (0 = degenerate empty run)
  int feature_dim = 0;     // learner dimension
  double ridge_lambda = 1.0;  // regularizer weight; also the prior strength of V
  double theta_bound = 1.0;   // assumed bound on the true parameter norm
  int feature_window = 0;     // demand-window length used by the default feature map
  std::optional<double> feature_norm_cap;  // optional cap applied to every feature norm
  bool strict_bandit = false;  // if true, history records demands of cached files only
  PolicyKind policy = PolicyKind::ucb;
  std::uint64_t seed = 0;
  std::string workload_tag;  // informational echo of the workload the run consumed

  void validate() const {
    if (num_files < 1) throw std::invalid_argument("num_files: must be >= 1");
    if (num_nodes < 1) throw std::invalid_argument("num_nodes: must be >= 1");
    if (cache_size < 1) throw std::invalid_argument("cache_size: must be >= 1");
    if (cache_size > num_files) throw std::invalid_argument("cache_size: must not exceed num_files");
    if (horizon < 0) throw std::invalid_argument("horizon: must be >= 0");
    if (feature_dim < 1) throw std::invalid_argument("feature_dim: must be >= 1");
    if (feature_window < 1) throw std::invalid_argument("feature_window: must be >= 1");
    if (feature_window != feature_dim) {
      throw std::invalid_argument("feature_window: must equal feature_dim");
    }
    if (!(ridge_lambda > 0.0)) throw std::invalid_argument("ridge_lambda: must be > 0");
    if (!(theta_bound > 0.0)) throw std::invalid_argument("theta_bound: must be > 0");
    if (feature_norm_cap && !(*feature_norm_cap > 0.0)) {
      throw std::invalid_argument("feature_norm_cap: must be > 0 when present");
    }
  }
};

inline nlohmann::json sim_config_to_json(const SimConfig& c) {
  nlohmann::json j{
      {"num_files", c.num_files},
      {"num_nodes", c.num_nodes},
      {"cache_size", c.cache_size},
      {"horizon", c.horizon},
      {"feature_dim", c.feature_dim},
      {"ridge_lambda", c.ridge_lambda},
      {"theta_bound", c.theta_bound},
      {"feature_window", c.feature_window},
      {"strict_bandit", c.strict_bandit},
      {"policy", to_string(c.policy)},
      {"seed", c.seed},
      {"workload", c.workload_tag},
  };
  if (c.feature_norm_cap) j["feature_norm_cap"] = *c.feature_norm_cap;
  return j;
}

}  // namespace edgecache

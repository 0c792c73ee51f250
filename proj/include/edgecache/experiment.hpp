#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/engine.hpp"
#include "edgecache/io_util.hpp"
#include "edgecache/verify.hpp"
#include "edgecache/workload.hpp"

namespace edgecache {

// Configuration mistakes (bad fields, unusable combinations). The CLI maps
// these to exit code 2; genuine runtime failures exit with 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct WorkloadConfig {
  enum class Kind { trace, synthetic, zipf };
  Kind kind = Kind::zipf;

  std::string path;  // kind == trace: CSV to load

  SyntheticSpec synthetic;  // kind == synthetic; theta_star may be empty (generated per seed)
  double theta_norm = 1.0;  // norm of generated theta rows

  ZipfSpec zipf;  // kind == zipf

  std::vector<SlotIndex> shifts;  // trace/zipf: per-node cyclic offsets (empty = all zero)
};

inline std::string to_string(WorkloadConfig::Kind k) {
  switch (k) {
    case WorkloadConfig::Kind::trace: return "trace";
    case WorkloadConfig::Kind::synthetic: return "synthetic";
    case WorkloadConfig::Kind::zipf: return "zipf";
  }
  throw std::invalid_argument("unknown workload kind");
}

// One experiment: a base simulation setup swept over policies x seeds.
struct ExperimentConfig {
  SimConfig base;  // policy/seed/workload_tag are filled per run by the sweep
  bool theta_bound_auto = false;
  std::vector<PolicyKind> policies;
  std::vector<std::uint64_t> seeds;
  WorkloadConfig workload;
  std::string output_dir = "out";
  std::vector<SlotIndex> checkpoints;  // slope-check probes for verification
  int jobs = 1;
};

// --- config JSON -----------------------------------------------------------------

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const std::string& key, const char* type_name) {
  const auto it = j.find(key);
  if (it == j.end()) throw ConfigError(key + ": required");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key + ": expected " + std::string(type_name));
  }
}

template <typename T>
T get_field_or(const nlohmann::json& j, const std::string& key, T fallback,
               const char* type_name) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(key + ": expected " + std::string(type_name));
  }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a json object");
  ExperimentConfig cfg;

  // Workload block first: trace workloads may omit num_files/horizon (inferred).
  const auto wit = j.find("workload");
  if (wit == j.end()) throw ConfigError("workload: required");
  if (!wit->is_object()) throw ConfigError("workload: expected an object");
  const nlohmann::json& w = *wit;
  const std::string kind = detail::get_field<std::string>(w, "kind", "string");
  if (kind == "trace") {
    cfg.workload.kind = WorkloadConfig::Kind::trace;
    cfg.workload.path = detail::get_field<std::string>(w, "path", "string");
    if (cfg.workload.path.empty()) throw ConfigError("workload.path: required");
  } else if (kind == "synthetic") {
    cfg.workload.kind = WorkloadConfig::Kind::synthetic;
    cfg.workload.synthetic.feature_max =
        detail::get_field_or<double>(w, "feature_max", 1.0, "number");
    cfg.workload.synthetic.noise_range =
        detail::get_field_or<double>(w, "noise_range", 0.5, "number");
    cfg.workload.synthetic.clamp_at_zero =
        detail::get_field_or<bool>(w, "clamp_at_zero", true, "boolean");
    cfg.workload.theta_norm = detail::get_field_or<double>(w, "theta_norm", 1.0, "number");
    if (!(cfg.workload.theta_norm > 0.0)) throw ConfigError("workload.theta_norm: must be > 0");
    if (w.contains("theta_star")) {
      std::vector<std::vector<double>> rows;
      try {
        rows = w.at("theta_star").get<std::vector<std::vector<double>>>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("workload.theta_star: expected an array of number arrays");
      }
      for (const auto& r : rows) {
        cfg.workload.synthetic.theta_star.push_back(
            Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
      }
    }
  } else if (kind == "zipf") {
    cfg.workload.kind = WorkloadConfig::Kind::zipf;
    cfg.workload.zipf.exponent = detail::get_field_or<double>(w, "exponent", 1.0, "number");
    cfg.workload.zipf.scale = detail::get_field_or<double>(w, "scale", 50.0, "number");
    cfg.workload.zipf.drift_period =
        detail::get_field_or<SlotIndex>(w, "drift_period", 0, "integer");
  } else {
    throw ConfigError("workload.kind: must be one of trace, synthetic, zipf");
  }
  if (w.contains("shifts")) {
    try {
      cfg.workload.shifts = w.at("shifts").get<std::vector<SlotIndex>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("workload.shifts: expected an array of integers");
    }
  }

  const bool dims_from_trace = cfg.workload.kind == WorkloadConfig::Kind::trace;
  cfg.base.num_files = dims_from_trace
                           ? detail::get_field_or<int>(j, "num_files", 0, "integer")
                           : detail::get_field<int>(j, "num_files", "integer");
  cfg.base.horizon = dims_from_trace
                         ? detail::get_field_or<SlotIndex>(j, "horizon", 0, "integer")
                         : detail::get_field<SlotIndex>(j, "horizon", "integer");
  cfg.base.num_nodes = detail::get_field<int>(j, "num_nodes", "integer");
  cfg.base.cache_size = detail::get_field<int>(j, "cache_size", "integer");
  cfg.base.feature_dim = detail::get_field<int>(j, "feature_dim", "integer");
  cfg.base.feature_window =
      detail::get_field_or<int>(j, "feature_window", cfg.base.feature_dim, "integer");
  cfg.base.ridge_lambda = detail::get_field_or<double>(j, "ridge_lambda", 1.0, "number");
  cfg.base.strict_bandit = detail::get_field_or<bool>(j, "strict_bandit", false, "boolean");
  if (j.contains("feature_norm_cap")) {
    cfg.base.feature_norm_cap =
        detail::get_field<double>(j, "feature_norm_cap", "number");
  }

  if (j.contains("theta_bound") && j.at("theta_bound").is_string()) {
    if (j.at("theta_bound").get<std::string>() != "auto") {
      throw ConfigError("theta_bound: expected a number or \"auto\"");
    }
    cfg.theta_bound_auto = true;
    cfg.base.theta_bound = 1.0;  // placeholder; resolved per workload
  } else {
    cfg.base.theta_bound = detail::get_field_or<double>(j, "theta_bound", 1.0, "number");
  }

  std::vector<std::string> policy_names =
      detail::get_field<std::vector<std::string>>(j, "policies", "array of strings");
  if (policy_names.empty()) throw ConfigError("policies: at least one required");
  for (const auto& p : policy_names) {
    try {
      cfg.policies.push_back(policy_from_string(p));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("policies: ") + e.what());
    }
  }

  cfg.seeds = detail::get_field<std::vector<std::uint64_t>>(j, "seeds", "array of integers");
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one required");

  cfg.output_dir = detail::get_field_or<std::string>(j, "output_dir", "out", "string");
  if (j.contains("checkpoints")) {
    try {
      cfg.checkpoints = j.at("checkpoints").get<std::vector<SlotIndex>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("checkpoints: expected an array of integers");
    }
  }
  cfg.jobs = detail::get_field_or<int>(j, "jobs", 1, "integer");
  if (cfg.jobs < 1) throw ConfigError("jobs: must be >= 1");

  if (!cfg.workload.shifts.empty() &&
      cfg.workload.shifts.size() != static_cast<std::size_t>(cfg.base.num_nodes)) {
    throw ConfigError("workload.shifts: need one offset per node");
  }
  if (!cfg.workload.synthetic.theta_star.empty()) {
    if (cfg.workload.synthetic.theta_star.size() != static_cast<std::size_t>(cfg.base.num_nodes)) {
      throw ConfigError("workload.theta_star: need one row per node");
    }
    for (const auto& row : cfg.workload.synthetic.theta_star) {
      if (row.size() != cfg.base.feature_dim) {
        throw ConfigError("workload.theta_star: rows must have feature_dim entries");
      }
    }
  }
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json w{{"kind", to_string(cfg.workload.kind)}};
  switch (cfg.workload.kind) {
    case WorkloadConfig::Kind::trace:
      w["path"] = cfg.workload.path;
      break;
    case WorkloadConfig::Kind::synthetic: {
      w["feature_max"] = cfg.workload.synthetic.feature_max;
      w["noise_range"] = cfg.workload.synthetic.noise_range;
      w["clamp_at_zero"] = cfg.workload.synthetic.clamp_at_zero;
      w["theta_norm"] = cfg.workload.theta_norm;
      if (!cfg.workload.synthetic.theta_star.empty()) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& th : cfg.workload.synthetic.theta_star) {
          rows.push_back(std::vector<double>(th.data(), th.data() + th.size()));
        }
        w["theta_star"] = std::move(rows);
      }
      break;
    }
    case WorkloadConfig::Kind::zipf:
      w["exponent"] = cfg.workload.zipf.exponent;
      w["scale"] = cfg.workload.zipf.scale;
      w["drift_period"] = cfg.workload.zipf.drift_period;
      break;
  }
  if (!cfg.workload.shifts.empty()) w["shifts"] = cfg.workload.shifts;

  std::vector<std::string> policy_names;
  for (PolicyKind p : cfg.policies) policy_names.push_back(to_string(p));

  nlohmann::json j{
      {"num_files", cfg.base.num_files},
      {"num_nodes", cfg.base.num_nodes},
      {"cache_size", cfg.base.cache_size},
      {"horizon", cfg.base.horizon},
      {"feature_dim", cfg.base.feature_dim},
      {"feature_window", cfg.base.feature_window},
      {"ridge_lambda", cfg.base.ridge_lambda},
      {"strict_bandit", cfg.base.strict_bandit},
      {"policies", policy_names},
      {"seeds", cfg.seeds},
      {"workload", std::move(w)},
      {"output_dir", cfg.output_dir},
      {"jobs", cfg.jobs},
  };
  if (cfg.theta_bound_auto) {
    j["theta_bound"] = "auto";
  } else {
    j["theta_bound"] = cfg.base.theta_bound;
  }
  if (cfg.base.feature_norm_cap) j["feature_norm_cap"] = *cfg.base.feature_norm_cap;
  if (!cfg.checkpoints.empty()) j["checkpoints"] = cfg.checkpoints;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: invalid json: ") + e.what());
  }
  return config_from_json(j);
}

// --- presets ---------------------------------------------------------------------

inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  auto seeds_upto = [](std::uint64_t k) {
    std::vector<std::uint64_t> s;
    for (std::uint64_t i = 1; i <= k; ++i) s.push_back(i);
    return s;
  };
  if (name == "fig3") {
    // Benchmark comparison on a drifting, node-shifted popularity trace.
    cfg.base.num_files = 100;
    cfg.base.num_nodes = 3;
    cfg.base.cache_size = 10;
    cfg.base.horizon = 1460;
    cfg.base.feature_dim = 5;
    cfg.base.feature_window = 5;
    cfg.base.ridge_lambda = 1.0;
    cfg.base.theta_bound = 1.0;
    cfg.policies = {PolicyKind::ucb, PolicyKind::ridge_greedy, PolicyKind::random};
    cfg.seeds = seeds_upto(10);
    cfg.workload.kind = WorkloadConfig::Kind::zipf;
    cfg.workload.zipf = ZipfSpec{1.0, 40.0, 120};
    cfg.workload.shifts = {0, 487, 973};
    cfg.output_dir = "out/fig3";
  } else if (name == "saturation") {
    // Cache-size sweep base: stationary popularity with a hard-zero long tail.
    cfg.base.num_files = 100;
    cfg.base.num_nodes = 3;
    cfg.base.cache_size = 30;
    cfg.base.horizon = 1460;
    cfg.base.feature_dim = 5;
    cfg.base.feature_window = 5;
    cfg.base.ridge_lambda = 1.0;
    cfg.base.theta_bound = 1.0;
    cfg.policies = {PolicyKind::ucb};
    cfg.seeds = seeds_upto(5);
    cfg.workload.kind = WorkloadConfig::Kind::zipf;
    cfg.workload.zipf = ZipfSpec{1.0, 12.0, 0};
    cfg.workload.shifts = {0, 487, 973};
    cfg.output_dir = "out/saturation";
  } else if (name == "calibration") {
    // Ground-truth workload sized for confidence-bound and slope verification.
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
    cfg.workload.synthetic.feature_max = 1.0;
    cfg.workload.synthetic.noise_range = 0.5;
    cfg.workload.synthetic.clamp_at_zero = false;
    cfg.workload.theta_norm = 6.0;
    cfg.checkpoints = {100, 700};
    cfg.output_dir = "out/calibration";
  } else {
    throw ConfigError("preset: unknown preset '" + name +
                      "' (available: fig3, saturation, calibration)");
  }
  return cfg;
}

// --- workload construction ---------------------------------------------------------

// Builds per-seed workloads; trace CSVs are loaded once up front, and that
// load also fills in num_files/horizon when the config left them at 0.
class WorkloadFactory {
 public:
  explicit WorkloadFactory(ExperimentConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.workload.kind == WorkloadConfig::Kind::trace) {
      base_ = load_trace(cfg_.workload.path);
      if (cfg_.base.num_files == 0) cfg_.base.num_files = base_->num_files;
      if (cfg_.base.horizon == 0) cfg_.base.horizon = base_->horizon;
      if (cfg_.base.num_files != base_->num_files) {
        throw ConfigError("num_files: config disagrees with the loaded trace");
      }
      if (cfg_.base.horizon != base_->horizon) {
        throw ConfigError("horizon: config disagrees with the loaded trace");
      }
    }
  }

  const ExperimentConfig& config() const { return cfg_; }

  Workload make(std::uint64_t seed) const {
    const int F = cfg_.base.num_files;
    const int N = cfg_.base.num_nodes;
    const SlotIndex T = cfg_.base.horizon;
    switch (cfg_.workload.kind) {
      case WorkloadConfig::Kind::trace:
        return Workload::from_trace(derive_node_traces(*base_, effective_shifts()));
      case WorkloadConfig::Kind::zipf: {
        Trace single = gen_zipf_trace(cfg_.workload.zipf, F, 1, T, seed);
        return Workload::from_trace(derive_node_traces(single, effective_shifts()));
      }
      case WorkloadConfig::Kind::synthetic: {
        SyntheticSpec spec = cfg_.workload.synthetic;
        std::uint64_t gen_seed = seed;
        if (spec.theta_star.empty()) {
          Rng r(seed);
          for (int n = 0; n < N; ++n) {
            Eigen::VectorXd th(cfg_.base.feature_dim);
            for (int i = 0; i < cfg_.base.feature_dim; ++i) th[i] = r.uniform01();
            if (th.norm() < 1e-12) th[0] = 1.0;
            th *= cfg_.workload.theta_norm / th.norm();
            spec.theta_star.push_back(std::move(th));
          }
          gen_seed = r.next_u64();
        }
        return Workload::from_synthetic(gen_synthetic(spec, F, T, gen_seed));
      }
    }
    throw std::logic_error("unreachable workload kind");
  }

  std::string workload_tag() const {
    if (cfg_.workload.kind == WorkloadConfig::Kind::trace) return "trace:" + cfg_.workload.path;
    return to_string(cfg_.workload.kind);
  }

 private:
  ShiftSpec effective_shifts() const {
    if (!cfg_.workload.shifts.empty()) return ShiftSpec{cfg_.workload.shifts};
    return ShiftSpec{std::vector<SlotIndex>(static_cast<std::size_t>(cfg_.base.num_nodes), 0)};
  }

  ExperimentConfig cfg_;
  std::optional<Trace> base_;
};

inline SimConfig resolve_sim_config(const ExperimentConfig& cfg, const Workload& workload,
                                    const std::string& tag, PolicyKind policy,
                                    std::uint64_t seed) {
  SimConfig sc = cfg.base;
  sc.policy = policy;
  sc.seed = seed;
  sc.workload_tag = tag;
  if (cfg.theta_bound_auto) {
    if (!workload.has_ground_truth()) {
      throw ConfigError("theta_bound: \"auto\" requires a synthetic workload");
    }
    double max_norm = 0.0;
    for (const auto& th : workload.theta_star) max_norm = std::max(max_norm, th.norm());
    if (!(max_norm > 0.0)) throw ConfigError("theta_bound: auto resolved to 0");
    sc.theta_bound = max_norm;
  }
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return sc;
}

// --- sweep runner ----------------------------------------------------------------

struct TaskOutcome {
  PolicyKind policy{};
  std::uint64_t seed = 0;
  double final_hits = 0.0;
  double final_regret = 0.0;
  double oracle_hits = 0.0;  // per-slot oracle total on this seed's workload
  std::string csv_path;
  std::string json_path;
};

struct SummaryRow {
  std::string policy;
  double mean_final_hits = 0.0;
  double mean_final_regret = 0.0;
};

struct SweepResult {
  std::vector<TaskOutcome> outcomes;  // (policy, seed) in config order
  std::vector<SummaryRow> rows;       // per policy, then both hindsight benchmarks
  std::string output_dir;
};

// Executes policies x seeds, writes one CSV + JSON report per run plus
// summary.csv/summary.json and the resolved config echo. Tasks are pure
// given (policy, seed) — each rebuilds its workload — so any jobs count
// produces identical artifacts.
inline SweepResult run_experiment(const ExperimentConfig& cfg_in, int jobs_override = 0) {
  if (cfg_in.theta_bound_auto && cfg_in.workload.kind != WorkloadConfig::Kind::synthetic) {
    throw ConfigError("theta_bound: \"auto\" requires a synthetic workload");
  }
  const WorkloadFactory factory{cfg_in};
  const ExperimentConfig& cfg = factory.config();

  struct Task {
    PolicyKind policy;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (PolicyKind p : cfg.policies) {
    for (std::uint64_t s : cfg.seeds) tasks.push_back(Task{p, s});
  }

  SweepResult result;
  result.output_dir = cfg.output_dir;
  result.outcomes.resize(tasks.size());
  std::filesystem::create_directories(cfg.output_dir);
  write_text_file(cfg.output_dir + "/config.json", config_to_json(cfg).dump(2) + "\n");

  std::vector<std::exception_ptr> task_errors(tasks.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& task = tasks[i];
        const Workload w = factory.make(task.seed);
        const SimConfig sc =
            resolve_sim_config(cfg, w, factory.workload_tag(), task.policy, task.seed);
        const RunReport rep = run(sc, w);
        const std::string stem =
            cfg.output_dir + "/" + to_string(task.policy) + "_seed" + std::to_string(task.seed);
        write_text_file(stem + ".csv", report_to_csv(rep));
        write_text_file(stem + ".json", report_to_json(rep).dump(2) + "\n");
        TaskOutcome& out = result.outcomes[i];
        out.policy = task.policy;
        out.seed = task.seed;
        out.final_hits = rep.final_hits();
        out.final_regret = rep.final_regret();
        out.oracle_hits = rep.final_hits() + rep.final_regret();
        out.csv_path = stem + ".csv";
        out.json_path = stem + ".json";
      } catch (...) {
        task_errors[i] = std::current_exception();
      }
    }
  };

  int jobs = jobs_override > 0 ? jobs_override : cfg.jobs;
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(jobs));
    for (int k = 0; k < jobs; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : task_errors) {
    if (e) std::rethrow_exception(e);
  }

  // Per-policy means, then both hindsight benchmarks on the same workloads.
  const double num_seeds = static_cast<double>(cfg.seeds.size());
  for (PolicyKind p : cfg.policies) {
    SummaryRow row;
    row.policy = to_string(p);
    for (const TaskOutcome& out : result.outcomes) {
      if (out.policy != p) continue;
      row.mean_final_hits += out.final_hits / num_seeds;
      row.mean_final_regret += out.final_regret / num_seeds;
    }
    result.rows.push_back(row);
  }
  {
    SummaryRow per_slot{"hindsight_per_slot", 0.0, 0.0};
    SummaryRow fixed{"hindsight_static", 0.0, 0.0};
    for (std::uint64_t seed : cfg.seeds) {
      const Workload w = factory.make(seed);
      const double best_per_slot =
          per_slot_sets_hits(w.trace, hindsight_per_slot(w.trace, cfg.base.cache_size));
      const double best_static =
          static_sets_hits(w.trace, hindsight_static(w.trace, cfg.base.cache_size));
      per_slot.mean_final_hits += best_per_slot / num_seeds;
      fixed.mean_final_hits += best_static / num_seeds;
      fixed.mean_final_regret += (best_per_slot - best_static) / num_seeds;
    }
    result.rows.push_back(per_slot);
    result.rows.push_back(fixed);
  }

  std::string csv = "policy,mean_final_hits,mean_final_regret\n";
  for (const SummaryRow& row : result.rows) {
    csv += row.policy + "," + format_double(row.mean_final_hits) + "," +
           format_double(row.mean_final_regret) + "\n";
  }
  write_text_file(cfg.output_dir + "/summary.csv", csv);

  nlohmann::json jrows = nlohmann::json::array();
  for (const SummaryRow& row : result.rows) {
    jrows.push_back(nlohmann::json{{"policy", row.policy},
                                   {"mean_final_hits", row.mean_final_hits},
                                   {"mean_final_regret", row.mean_final_regret}});
  }
  nlohmann::json jruns = nlohmann::json::array();
  for (const TaskOutcome& out : result.outcomes) {
    jruns.push_back(nlohmann::json{{"policy", to_string(out.policy)},
                                   {"seed", out.seed},
                                   {"final_hits", out.final_hits},
                                   {"final_regret", out.final_regret},
                                   {"oracle_hits", out.oracle_hits},
                                   {"csv", out.csv_path},
                                   {"json", out.json_path}});
  }
  write_text_file(cfg.output_dir + "/summary.json",
                  nlohmann::json{{"rows", std::move(jrows)}, {"runs", std::move(jruns)}}.dump(2) +
                      "\n");
  return result;
}

// --- CLI commands ------------------------------------------------------------------

// EBC_SEED environment override: replaces the first configured seed.
inline void apply_env_seed(ExperimentConfig& cfg) {
  const char* env = std::getenv("EBC_SEED");
  if (env == nullptr || *env == '\0') return;
  std::uint64_t v = 0;
  const char* last = env + std::string_view(env).size();
  const auto res = std::from_chars(env, last, v);
  if (res.ec != std::errc{} || res.ptr != last) {
    throw ConfigError("EBC_SEED: must be an unsigned integer");
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one required");
  cfg.seeds[0] = v;
}

struct RunOptions {
  std::string config_path;  // exactly one of config_path / preset
  std::string preset;
  std::optional<int> cache_size_override;
  std::optional<int> jobs_override;
  std::optional<std::string> output_dir_override;
};

inline ExperimentConfig load_run_config(const std::string& config_path, const std::string& preset) {
  if (config_path.empty() && preset.empty()) {
    throw ConfigError("config: either --config or --preset is required");
  }
  if (!config_path.empty() && !preset.empty()) {
    throw ConfigError("config: --config and --preset are mutually exclusive");
  }
  return config_path.empty() ? preset_config(preset) : load_config(config_path);
}

inline int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_run_config(opt.config_path, opt.preset);
    if (opt.cache_size_override) cfg.base.cache_size = *opt.cache_size_override;
    if (opt.jobs_override) cfg.jobs = *opt.jobs_override;
    if (opt.output_dir_override) cfg.output_dir = *opt.output_dir_override;
    apply_env_seed(cfg);
    const SweepResult result = run_experiment(cfg);
    for (const SummaryRow& row : result.rows) {
      out << row.policy << ": mean final hits " << format_double(row.mean_final_hits)
          << ", mean final regret " << format_double(row.mean_final_regret) << "\n";
    }
    out << "wrote " << result.output_dir << "/summary.csv (" << result.outcomes.size()
        << " runs)\n";
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

struct VerifyOptions {
  std::string config_path;
  std::string preset;
  std::optional<std::string> output_dir_override;
};

// Runs the confidence-bound coverage grid and the average-regret slope check
// against a ground-truth workload; exit 1 when any assertion fails.
inline int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig cfg = load_run_config(opt.config_path, opt.preset);
    if (opt.output_dir_override) cfg.output_dir = *opt.output_dir_override;
    apply_env_seed(cfg);
    if (cfg.workload.kind != WorkloadConfig::Kind::synthetic) {
      throw ConfigError("workload: verification requires ground truth (kind \"synthetic\")");
    }
    if (cfg.workload.synthetic.clamp_at_zero) {
      throw ConfigError("workload.clamp_at_zero: must be false for verification");
    }
    const WorkloadFactory factory{cfg};

    const std::vector<double> deltas = {0.5, 1.0, 2.0};
    std::vector<std::vector<CoverageResult>> parts(deltas.size());
    std::vector<RunReport> reports;
    for (std::uint64_t seed : cfg.seeds) {
      const Workload w = factory.make(seed);
      const SimConfig sc =
          resolve_sim_config(cfg, w, factory.workload_tag(), PolicyKind::ucb, seed);
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        parts[i].push_back(coverage_audit(sc, w, deltas[i]));
      }
      reports.push_back(run(sc, w));
    }

    bool all_ok = true;
    nlohmann::json jcov = nlohmann::json::array();
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const CoverageResult total = merge_coverage(parts[i]);
      const double bound = std::min(total.analytical_bound(), 1.0);
      const double margin = coverage_margin(total.analytical_bound(), total.trials);
      const bool ok = total.empirical_rate() <= bound + margin;
      all_ok = all_ok && ok;
      out << "coverage delta=" << format_double(total.delta) << ": rate "
          << format_double(total.empirical_rate()) << " (" << total.violations << "/"
          << total.trials << "), bound " << format_double(bound) << " + margin "
          << format_double(margin) << (ok ? " ... ok" : " ... FAIL") << "\n";
      nlohmann::json row = coverage_to_json(total);
      row["margin"] = margin;
      row["ok"] = ok;
      jcov.push_back(std::move(row));
    }

    std::vector<SlotIndex> checkpoints = cfg.checkpoints;
    if (checkpoints.empty()) {
      checkpoints = {std::max<SlotIndex>(1, cfg.base.horizon / 10), cfg.base.horizon};
    }
    const SlopeResult slope = regret_slope_check(reports, checkpoints);
    const double first = slope.checkpoints.front().second;
    const double last = slope.checkpoints.back().second;
    const bool slope_ok = last <= 0.5 * first;
    all_ok = all_ok && slope_ok;
    out << "regret slope: avg regret " << format_double(first) << " @t="
        << slope.checkpoints.front().first << " -> " << format_double(last) << " @t="
        << slope.checkpoints.back().first << " (need <= 0.5x)"
        << (slope_ok ? " ... ok" : " ... FAIL") << "\n";

    nlohmann::json report{
        {"config", config_to_json(cfg)},
        {"coverage", std::move(jcov)},
        {"slope", slope_to_json(slope)},
        {"slope_ok", slope_ok},
        {"ok", all_ok},
    };
    std::filesystem::create_directories(cfg.output_dir);
    write_text_file(cfg.output_dir + "/verification_report.json", report.dump(2) + "\n");
    out << "wrote " << cfg.output_dir << "/verification_report.json\n";
    return all_ok ? 0 : 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

struct GenTraceOptions {
  std::string spec_path;
  std::string out_path;
};

// Generates a single-node CSV trace from a generator spec; synthetic specs
// also write "<out>.theta.json" with the ground truth.
inline int cmd_gen_trace(const GenTraceOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    if (opt.spec_path.empty()) throw ConfigError("spec: required");
    if (opt.out_path.empty()) throw ConfigError("out: required");
    std::string text;
    try {
      text = read_text_file(opt.spec_path);
    } catch (const std::runtime_error& e) {
      throw ConfigError(std::string("spec: ") + e.what());
    }
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("spec: invalid json: ") + e.what());
    }
    const std::string kind = detail::get_field<std::string>(j, "kind", "string");
    const int num_files = detail::get_field<int>(j, "num_files", "integer");
    const SlotIndex horizon = detail::get_field<SlotIndex>(j, "horizon", "integer");
    const std::uint64_t seed = detail::get_field<std::uint64_t>(j, "seed", "integer");

    if (kind == "zipf") {
      ZipfSpec spec;
      spec.exponent = detail::get_field_or<double>(j, "exponent", 1.0, "number");
      spec.scale = detail::get_field_or<double>(j, "scale", 50.0, "number");
      spec.drift_period = detail::get_field_or<SlotIndex>(j, "drift_period", 0, "integer");
      const Trace t = gen_zipf_trace(spec, num_files, 1, horizon, seed);
      save_trace_csv(t, opt.out_path);
      out << "wrote " << opt.out_path << " (files=" << t.num_files << ", slots=" << t.horizon
          << ")\n";
    } else if (kind == "synthetic") {
      SyntheticSpec spec;
      spec.feature_max = detail::get_field_or<double>(j, "feature_max", 1.0, "number");
      spec.noise_range = detail::get_field_or<double>(j, "noise_range", 0.5, "number");
      spec.clamp_at_zero = detail::get_field_or<bool>(j, "clamp_at_zero", true, "boolean");
      if (j.contains("theta_star")) {
        std::vector<std::vector<double>> rows;
        try {
          rows = j.at("theta_star").get<std::vector<std::vector<double>>>();
        } catch (const nlohmann::json::exception&) {
          throw ConfigError("theta_star: expected an array of number arrays");
        }
        for (const auto& r : rows) {
          spec.theta_star.push_back(
              Eigen::Map<const Eigen::VectorXd>(r.data(), static_cast<Eigen::Index>(r.size())));
        }
      } else {
        const int dim = detail::get_field<int>(j, "feature_dim", "integer");
        const double norm = detail::get_field_or<double>(j, "theta_norm", 1.0, "number");
        if (dim < 1) throw ConfigError("feature_dim: must be >= 1");
        if (!(norm > 0.0)) throw ConfigError("theta_norm: must be > 0");
        Rng r(seed ^ 0x9e3779b97f4a7c15ull);
        Eigen::VectorXd th(dim);
        for (int i = 0; i < dim; ++i) th[i] = r.uniform01();
        if (th.norm() < 1e-12) th[0] = 1.0;
        th *= norm / th.norm();
        spec.theta_star.push_back(std::move(th));
      }
      if (spec.theta_star.size() != 1) {
        throw ConfigError("theta_star: the single-node csv schema allows exactly one row");
      }
      const SyntheticData data = gen_synthetic(spec, num_files, horizon, seed);
      if (!spec.clamp_at_zero) {
        for (double v : data.trace.values) {
          if (v < 0.0) {
            throw ConfigError(
                "clamp_at_zero: generated demands went negative; the csv schema stores "
                "non-negative counts");
          }
        }
      }
      save_trace_csv(data.trace, opt.out_path);
      write_text_file(opt.out_path + ".theta.json",
                      synthetic_ground_truth_json(data).dump(2) + "\n");
      out << "wrote " << opt.out_path << " and " << opt.out_path << ".theta.json (files="
          << data.trace.num_files << ", slots=" << data.trace.horizon << ")\n";
    } else {
      throw ConfigError("kind: must be one of zipf, synthetic");
    }
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace edgecache

#pragma once

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/io_util.hpp"
#include "edgecache/rng.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

// Dense demand tensor, one value per (file, node, slot). Values are finite;
// count-based sources (CSV loads, the generators below with clamping) keep
// them non-negative, while unclamped synthetic data may dip slightly below 0.
struct Trace {
  int num_files = 0;
  int num_nodes = 0;
  SlotIndex horizon = 0;
  std::string source;          // informational tag carried into run reports
  std::vector<Demand> values;  // layout: ((f * num_nodes) + n) * horizon + (t - 1)

  static Trace zeros(int num_files, int num_nodes, SlotIndex horizon, std::string source) {
    if (num_files < 1 || num_nodes < 1 || horizon < 0) {
      throw std::invalid_argument("Trace::zeros: dimensions out of range");
    }
    Trace t;
    t.num_files = num_files;
    t.num_nodes = num_nodes;
    t.horizon = horizon;
    t.source = std::move(source);
    t.values.assign(static_cast<std::size_t>(num_files) * num_nodes * horizon, 0.0);
    return t;
  }

  std::size_t index(FileId f, NodeId n, SlotIndex t) const {
    if (f >= static_cast<FileId>(num_files) || n >= static_cast<NodeId>(num_nodes) || t < 1 ||
        t > horizon) {
      throw std::invalid_argument("Trace: (file, node, slot) out of range");
    }
    return (static_cast<std::size_t>(f) * num_nodes + n) * static_cast<std::size_t>(horizon) +
           static_cast<std::size_t>(t - 1);
  }

  Demand demand(FileId f, NodeId n, SlotIndex t) const { return values[index(f, n, t)]; }
  Demand& at(FileId f, NodeId n, SlotIndex t) { return values[index(f, n, t)]; }

  void validate() const {
    if (num_files < 1 || num_nodes < 1 || horizon < 0) {
      throw std::invalid_argument("Trace: dimensions out of range");
    }
    if (values.size() != static_cast<std::size_t>(num_files) * num_nodes * horizon) {
      throw std::invalid_argument("Trace: value count disagrees with dimensions");
    }
    for (double v : values) {
      if (!std::isfinite(v)) throw std::invalid_argument("Trace: values must be finite");
    }
  }
};

// --- CSV round-trip (single-node schema: file_id,slot,count) -----------------

struct TraceCsvSchema {
  bool require_header = true;
};

namespace detail {

inline std::string trim(std::string_view sv) {
  const auto b = sv.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = sv.find_last_not_of(" \t\r");
  return std::string(sv.substr(b, e - b + 1));
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

inline bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc{} && res.ptr == last;
}

}  // namespace detail

// Parses the single-node CSV schema. Dimensions are inferred from the data:
// num_files = 1 + max file_id, horizon = max slot. `origin` names the source
// in error messages (the path, for loads from disk).
inline Trace parse_trace_csv(const std::string& text, const TraceCsvSchema& schema = {},
                             const std::string& origin = "<string>") {
  const auto fail = [&origin](const std::string& msg) -> void {
    throw std::runtime_error(origin + ": " + msg);
  };

  struct Row {
    long long file;
    long long slot;
    double count;
  };
  std::vector<Row> rows;
  std::unordered_set<std::uint64_t> seen;

  long long max_file = -1;
  long long max_slot = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_done = !schema.require_header;

  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view line_view =
        std::string_view(text).substr(pos, nl == std::string::npos ? text.size() - pos : nl - pos);
    pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
    ++line_no;
    if (detail::trim(line_view).empty()) continue;

    const auto fields = detail::split_fields(line_view);
    if (!header_done) {
      if (fields.size() != 3 || fields[0] != "file_id" || fields[1] != "slot" ||
          fields[2] != "count") {
        fail("missing or malformed header at line " + std::to_string(line_no) +
             " (expected file_id,slot,count)");
      }
      header_done = true;
      continue;
    }

    if (fields.size() != 3) fail("malformed row at line " + std::to_string(line_no));
    long long file = 0;
    long long slot = 0;
    if (!detail::parse_int(fields[0], file) || file < 0) {
      fail("malformed row at line " + std::to_string(line_no));
    }
    if (!detail::parse_int(fields[1], slot) || slot < 1) {
      fail("malformed row at line " + std::to_string(line_no));
    }
    double count = 0.0;
    if (!detail::parse_real(fields[2], count) || !std::isfinite(count)) {
      fail("non-numeric demand at line " + std::to_string(line_no));
    }
    if (count < 0.0) fail("negative demand at line " + std::to_string(line_no));
    if (file >= 100'000'000 || slot >= 100'000'000) {
      fail("file_id or slot out of supported range at line " + std::to_string(line_no));
    }
    const std::uint64_t key =
        (static_cast<std::uint64_t>(file) << 32) | static_cast<std::uint64_t>(slot);
    if (!seen.insert(key).second) {
      fail("duplicate entry for file " + std::to_string(file) + " at slot " +
           std::to_string(slot) + " (line " + std::to_string(line_no) + ")");
    }
    rows.push_back(Row{file, slot, count});
    max_file = std::max(max_file, file);
    max_slot = std::max(max_slot, slot);
  }

  if (rows.empty()) fail("no records");
  if ((max_file + 1) * max_slot > 500'000'000) fail("trace too large");

  Trace t = Trace::zeros(static_cast<int>(max_file + 1), 1, max_slot, origin);
  for (const Row& r : rows) {
    t.at(static_cast<FileId>(r.file), 0, r.slot) = r.count;
  }
  return t;
}

inline Trace load_trace(const std::string& path, const TraceCsvSchema& schema = {}) {
  return parse_trace_csv(read_text_file(path), schema, path);
}

// Serializes a single-node trace: all non-zero cells in (file, slot) order,
// plus an explicit row for cell (num_files-1, horizon) when it is zero so a
// re-load infers identical dimensions.
inline std::string trace_to_csv(const Trace& t) {
  t.validate();
  if (t.num_nodes != 1) {
    throw std::invalid_argument("trace_to_csv: csv schema has no node column (num_nodes must be 1)");
  }
  if (t.horizon < 1) throw std::invalid_argument("trace_to_csv: horizon must be >= 1");
  std::string out = "file_id,slot,count\n";
  bool last_cell_written = false;
  for (int f = 0; f < t.num_files; ++f) {
    for (SlotIndex s = 1; s <= t.horizon; ++s) {
      const double v = t.demand(static_cast<FileId>(f), 0, s);
      if (v != 0.0) {
        out += std::to_string(f);
        out += ',';
        out += std::to_string(s);
        out += ',';
        out += format_double(v);
        out += '\n';
        if (f == t.num_files - 1 && s == t.horizon) last_cell_written = true;
      }
    }
  }
  if (!last_cell_written) {
    out += std::to_string(t.num_files - 1);
    out += ',';
    out += std::to_string(t.horizon);
    out += ",0\n";
  }
  return out;
}

inline void save_trace_csv(const Trace& t, const std::string& path) {
  write_text_file(path, trace_to_csv(t));
}

// --- node derivation by cyclic time shifts ------------------------------------

// One offset per derived node. Node n's demand at slot t is the base demand
// at slot ((t - 1 - offset_n) mod horizon) + 1; offsets may be negative.
struct ShiftSpec {
  std::vector<SlotIndex> offsets;
};

inline Trace derive_node_traces(const Trace& base, const ShiftSpec& spec) {
  base.validate();
  if (base.num_nodes != 1) {
    throw std::invalid_argument("derive_node_traces: base trace must be single-node");
  }
  if (spec.offsets.empty()) {
    throw std::invalid_argument("derive_node_traces: at least one offset required");
  }
  const SlotIndex T = base.horizon;
  for (SlotIndex off : spec.offsets) {
    if (off < -T || off > T) {
      throw std::invalid_argument("derive_node_traces: offsets must lie in [-horizon, horizon]");
    }
  }
  const int nodes = static_cast<int>(spec.offsets.size());
  Trace out = Trace::zeros(base.num_files, nodes, T, base.source);
  if (T == 0) return out;
  for (int f = 0; f < base.num_files; ++f) {
    for (int n = 0; n < nodes; ++n) {
      const SlotIndex off = spec.offsets[static_cast<std::size_t>(n)];
      for (SlotIndex t = 1; t <= T; ++t) {
        const SlotIndex shifted = ((t - 1 - off) % T + T) % T + 1;
        out.at(static_cast<FileId>(f), static_cast<NodeId>(n), t) =
            base.demand(static_cast<FileId>(f), 0, shifted);
      }
    }
  }
  return out;
}

// --- synthetic linear-model generator -----------------------------------------

// Ground-truth model: per node n, demand(f, n, t) = x(f,n,t) . theta_star[n] + noise,
// with feature components i.i.d. uniform on [0, feature_max) and noise uniform
// on [-noise_range/2, +noise_range/2]. clamp_at_zero floors demands at 0 (set
// it false when unbiased residuals matter more than count semantics).
struct SyntheticSpec {
  std::vector<Eigen::VectorXd> theta_star;  // one per node, equal dimensions
  double feature_max = 1.0;
  double noise_range = 0.5;
  bool clamp_at_zero = true;

  int feature_dim() const {
    return theta_star.empty() ? 0 : static_cast<int>(theta_star.front().size());
  }
  int num_nodes() const { return static_cast<int>(theta_star.size()); }

  void validate() const {
    if (theta_star.empty()) {
      throw std::invalid_argument("synthetic.theta_star: at least one node row required");
    }
    const auto d = theta_star.front().size();
    if (d < 1) throw std::invalid_argument("synthetic.theta_star: dimension must be >= 1");
    for (const auto& th : theta_star) {
      if (th.size() != d) {
        throw std::invalid_argument("synthetic.theta_star: rows must share one dimension");
      }
      if (!th.allFinite()) throw std::invalid_argument("synthetic.theta_star: values must be finite");
    }
    if (!(feature_max >= 0.0) || !std::isfinite(feature_max)) {
      throw std::invalid_argument("synthetic.feature_max: must be finite and >= 0");
    }
    if (!(noise_range > 0.0 && noise_range <= 1.0)) {
      throw std::invalid_argument("synthetic.noise_range: must lie in (0, 1]");
    }
  }
};

// Dense per-(file, node, slot) feature storage for exogenous-feature runs.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(int num_files, int num_nodes, SlotIndex horizon, int dim)
      : num_files_(num_files), num_nodes_(num_nodes), horizon_(horizon), dim_(dim) {
    if (num_files < 1 || num_nodes < 1 || horizon < 0 || dim < 1) {
      throw std::invalid_argument("FeatureTensor: dimensions out of range");
    }
    data_.assign(static_cast<std::size_t>(num_files) * num_nodes * horizon * dim, 0.0);
  }

  bool empty() const { return data_.empty(); }
  int num_files() const { return num_files_; }
  int num_nodes() const { return num_nodes_; }
  SlotIndex horizon() const { return horizon_; }
  int feature_dim() const { return dim_; }

  Eigen::Map<const Eigen::VectorXd> at(FileId f, NodeId n, SlotIndex t) const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data() + offset(f, n, t), dim_);
  }

  double* mutable_at(FileId f, NodeId n, SlotIndex t) { return data_.data() + offset(f, n, t); }

 private:
  std::size_t offset(FileId f, NodeId n, SlotIndex t) const {
    if (f >= static_cast<FileId>(num_files_) || n >= static_cast<NodeId>(num_nodes_) || t < 1 ||
        t > horizon_) {
      throw std::invalid_argument("FeatureTensor: (file, node, slot) out of range");
    }
    return ((static_cast<std::size_t>(f) * num_nodes_ + n) * static_cast<std::size_t>(horizon_) +
            static_cast<std::size_t>(t - 1)) *
           dim_;
  }

  int num_files_ = 0;
  int num_nodes_ = 0;
  SlotIndex horizon_ = 0;
  int dim_ = 0;
  std::vector<double> data_;
};

struct SyntheticData {
  Trace trace;
  FeatureTensor features;
  SyntheticSpec spec;
  std::uint64_t seed = 0;
};

// Draw order is pinned (files outer, nodes, slots, then dim feature draws and
// one noise draw) so a seed fully determines the data on every platform.
inline SyntheticData gen_synthetic(const SyntheticSpec& spec, int num_files, SlotIndex horizon,
                                   std::uint64_t seed) {
  spec.validate();
  if (num_files < 1) throw std::invalid_argument("gen_synthetic: num_files must be >= 1");
  if (horizon < 0) throw std::invalid_argument("gen_synthetic: horizon must be >= 0");
  const int nodes = spec.num_nodes();
  const int dim = spec.feature_dim();

  SyntheticData out;
  out.spec = spec;
  out.seed = seed;
  out.trace = Trace::zeros(num_files, nodes, horizon, "synthetic");
  out.features = FeatureTensor(num_files, nodes, horizon, dim);

  Rng rng(seed);
  for (int f = 0; f < num_files; ++f) {
    for (int n = 0; n < nodes; ++n) {
      for (SlotIndex t = 1; t <= horizon; ++t) {
        double* x = out.features.mutable_at(static_cast<FileId>(f), static_cast<NodeId>(n), t);
        double mean = 0.0;
        for (int i = 0; i < dim; ++i) {
          x[i] = rng.uniform(0.0, spec.feature_max);
          mean += x[i] * spec.theta_star[static_cast<std::size_t>(n)][i];
        }
        const double noise = (rng.uniform01() - 0.5) * spec.noise_range;
        double d = mean + noise;
        if (spec.clamp_at_zero && d < 0.0) d = 0.0;
        out.trace.at(static_cast<FileId>(f), static_cast<NodeId>(n), t) = d;
      }
    }
  }
  return out;
}

// Ground-truth sidecar written next to generated synthetic traces.
inline nlohmann::json synthetic_ground_truth_json(const SyntheticData& data) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& th : data.spec.theta_star) {
    rows.push_back(std::vector<double>(th.data(), th.data() + th.size()));
  }
  return nlohmann::json{{"theta_star", rows}, {"sigma", data.spec.noise_range}, {"seed", data.seed}};
}

// --- zipf popularity generator -------------------------------------------------

// Integral request counts with popularity rank r drawing, per slot,
// floor(scale * r^(-exponent) * u + 0.5) with u uniform on [0.5, 1.5).
// File-to-rank assignment is a seeded permutation, reshuffled every
// drift_period slots (0 = never), which makes popularity non-stationary.
struct ZipfSpec {
  double exponent = 1.0;
  double scale = 50.0;
  SlotIndex drift_period = 0;

  void validate() const {
    if (!(exponent > 0.0) || !std::isfinite(exponent)) {
      throw std::invalid_argument("zipf.exponent: must be finite and > 0");
    }
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw std::invalid_argument("zipf.scale: must be finite and >= 0");
    }
    if (drift_period < 0) throw std::invalid_argument("zipf.drift_period: must be >= 0");
  }
};

inline Trace gen_zipf_trace(const ZipfSpec& spec, int num_files, int num_nodes, SlotIndex horizon,
                            std::uint64_t seed) {
  spec.validate();
  if (num_files < 1) throw std::invalid_argument("gen_zipf_trace: num_files must be >= 1");
  if (num_nodes < 1) throw std::invalid_argument("gen_zipf_trace: num_nodes must be >= 1");
  if (horizon < 0) throw std::invalid_argument("gen_zipf_trace: horizon must be >= 0");

  Trace out = Trace::zeros(num_files, num_nodes, horizon, "zipf");
  Rng rng(seed);

  // rank_of[f] = 0-based popularity rank of file f
  std::vector<std::uint32_t> rank_of(static_cast<std::size_t>(num_files));
  std::iota(rank_of.begin(), rank_of.end(), 0u);
  rng.shuffle(rank_of);

  std::vector<double> mean_for_rank(static_cast<std::size_t>(num_files));
  for (int r = 0; r < num_files; ++r) {
    mean_for_rank[static_cast<std::size_t>(r)] = spec.scale * std::pow(r + 1.0, -spec.exponent);
  }

  for (SlotIndex t = 1; t <= horizon; ++t) {
    if (spec.drift_period > 0 && t > 1 && (t - 1) % spec.drift_period == 0) {
      rng.shuffle(rank_of);
    }
    for (int n = 0; n < num_nodes; ++n) {
      for (int f = 0; f < num_files; ++f) {
        const double mean = mean_for_rank[rank_of[static_cast<std::size_t>(f)]];
        const double u = rng.uniform(0.5, 1.5);
        out.at(static_cast<FileId>(f), static_cast<NodeId>(n), t) = std::floor(mean * u + 0.5);
      }
    }
  }
  return out;
}

// --- engine-facing bundle -------------------------------------------------------

/// What one run consumes: the demand tensor, plus (for synthetic data) the
// exogenous features and the ground truth that verification needs.
struct Workload {
  Trace trace;
  FeatureTensor features;                   // empty unless synthetic
  std::vector<Eigen::VectorXd> theta_star;  // empty unless ground truth is known
  double noise_range = 0.0;                 // meaningful only with ground truth

  bool has_ground_truth() const { return !theta_star.empty(); }

  static Workload from_trace(Trace t) {
    t.validate();
    Workload w;
    w.trace = std::move(t);
    return w;
  }

  static Workload from_synthetic(SyntheticData d) {
    Workload w;
    w.trace = std::move(d.trace);
    w.features = std::move(d.features);
    w.theta_star = std::move(d.spec.theta_star);
    w.noise_range = d.spec.noise_range;
    return w;
  }
};

}  // namespace edgecache

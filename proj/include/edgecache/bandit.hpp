#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "edgecache/rng.hpp"
#include "edgecache/types.hpp"

namespace edgecache {

// The rank-one inverse updates accumulate roundoff; the inverse is rebuilt
// from scratch on this cadence, or sooner if coherence drifts past the bound.
inline constexpr long long kInverseRefactorPeriod = 1000;
inline constexpr double kInverseCoherenceTol = 1e-8;

// Per-node ridge-regression state, pooled over that node's files:
//   V = ridge_lambda * I + sum over updates of x x^T
//   h = sum over updates of x * observed_demand
// V_inv mirrors the inverse of V so scoring stays O(d^2) per file.
struct NodeLearnerState {
  Eigen::MatrixXd V;
  Eigen::MatrixXd V_inv;
  Eigen::VectorXd h;
  double ridge_lambda = 0.0;
  long long updates_applied = 0;

  int dim() const { return static_cast<int>(h.size()); }
};

inline NodeLearnerState init_state(int dim, double ridge_lambda) {
  if (dim < 1) throw std::invalid_argument("init_state: dim must be >= 1");
  if (!(ridge_lambda > 0.0)) throw std::invalid_argument("init_state: ridge_lambda must be > 0");
  NodeLearnerState s;
  s.V = Eigen::MatrixXd::Identity(dim, dim) * ridge_lambda;
  s.V_inv = Eigen::MatrixXd::Identity(dim, dim) / ridge_lambda;
  s.h = Eigen::VectorXd::Zero(dim);
  s.ridge_lambda = ridge_lambda;
  return s;
}

// max-abs entry of V * V_inv - I; the coherence measure the state contract bounds.
inline double inverse_residual(const NodeLearnerState& s) {
  const int d = s.dim();
  return (s.V * s.V_inv - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
}

// Rebuild V_inv from V: symmetrize, Cholesky solve, then Newton passes
// (X <- X (2I - V X) squares the residual) until coherence holds with slack.
inline void refactor_inverse(NodeLearnerState& s) {
  const int d = s.dim();
  s.V = (0.5 * (s.V + s.V.transpose())).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(s.V);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("refactor_inverse: V is no longer positive definite");
  }
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(d, d);
  s.V_inv = llt.solve(identity);
  for (int pass = 0; pass < 4 && inverse_residual(s) > kInverseCoherenceTol * 0.1; ++pass) {
    s.V_inv = (s.V_inv * (2.0 * identity - s.V * s.V_inv)).eval();
  }
  s.V_inv = (0.5 * (s.V_inv + s.V_inv.transpose())).eval();
}

inline Eigen::VectorXd estimate_theta(const NodeLearnerState& s) { return s.V_inv * s.h; }

inline double predict(const NodeLearnerState& s, const FeatureVector& x) {
  if (x.size() != s.h.size()) throw std::invalid_argument("predict: feature dimension mismatch");
  return x.dot(estimate_theta(s));
}

// Exploration weight at slot t for a catalog of the given size:
// sqrt(max(0, ln(t * sqrt(catalog)))) + theta_bound * ridge_lambda.
// Non-decreasing in t; the max() guards the degenerate t = catalog = 1 corner.
inline double alpha(SlotIndex t, int catalog_size, double theta_bound, double ridge_lambda) {
  if (t < 1) throw std::invalid_argument("alpha: slot must be >= 1");
  if (catalog_size < 1) throw std::invalid_argument("alpha: catalog_size must be >= 1");
  const double inside =
      std::log(static_cast<double>(t) * std::sqrt(static_cast<double>(catalog_size)));
  return std::sqrt(std::max(0.0, inside)) + theta_bound * ridge_lambda;
}

// Confidence width alpha_value * sqrt(x^T V_inv x); the quadratic form is
// clamped at zero so roundoff near singular directions cannot leak a NaN.
inline double perturbation(const NodeLearnerState& s, const FeatureVector& x, double alpha_value) {
  if (x.size() != s.h.size()) throw std::invalid_argument("perturbation: feature dimension mismatch");
  if (!(alpha_value >= 0.0)) throw std::invalid_argument("perturbation: alpha must be >= 0");
  const double q = x.dot(s.V_inv * x);
  return alpha_value * std::sqrt(std::max(0.0, q));
}

struct Score {
  FileId file = 0;
  double predicted = 0.0;  // x . theta_hat
  double width = 0.0;      // confidence perturbation, always >= 0
  double ucb = 0.0;        // predicted + width; the selection key
};

// Scores every file of the catalog under one policy.
//  - ucb:          predicted + width with the slot-dependent alpha
//  - ridge_greedy: the same path with alpha forced to 0 (width == 0)
//  - random:       a fresh uniform draw per file from the run's generator
inline std::vector<Score> score_all(const NodeLearnerState& s,
                                    const std::vector<FeatureVector>& features, SlotIndex t,
                                    double theta_bound, double ridge_lambda, PolicyKind policy,
                                    Rng& rng) {
  const int catalog = static_cast<int>(features.size());
  if (catalog < 1) throw std::invalid_argument("score_all: catalog must be non-empty");
  std::vector<Score> out(catalog);
  if (policy == PolicyKind::random) {
    for (int f = 0; f < catalog; ++f) {
      const double u = rng.uniform01();
      out[f] = Score{static_cast<FileId>(f), u, 0.0, u};
    }
    return out;
  }
  const Eigen::VectorXd theta = estimate_theta(s);
  const double a = (policy == PolicyKind::ucb) ? alpha(t, catalog, theta_bound, ridge_lambda) : 0.0;
  for (int f = 0; f < catalog; ++f) {
    const FeatureVector& x = features[f];
    if (x.size() != s.h.size()) throw std::invalid_argument("score_all: feature dimension mismatch");
    const double mean = x.dot(theta);
    const double width = perturbation(s, x, a);
    out[f] = Score{static_cast<FileId>(f), mean, width, mean + width};
  }
  return out;
}

// Indices of the c largest values; equal values prefer the smaller index.
// Result comes back in ascending index order.
inline std::vector<FileId> top_c_by_value(const std::vector<double>& values, int c) {
  if (c < 0 || static_cast<std::size_t>(c) > values.size()) {
    throw std::invalid_argument("top_c_by_value: c out of range");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("top_c_by_value: non-finite value");
  }
  std::vector<FileId> order(values.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&values](FileId a, FileId b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  });
  order.resize(c);
  std::sort(order.begin(), order.end());
  return order;
}

// The cache decision: the c files with the highest ucb, smaller FileId on ties.
// Scores must cover files 0..F-1 exactly once (any order).
inline std::vector<FileId> select_top_c(const std::vector<Score>& scores, int c) {
  std::vector<double> keys(scores.size(), 0.0);
  std::vector<bool> seen(scores.size(), false);
  for (const Score& sc : scores) {
    if (sc.file >= scores.size() || seen[sc.file]) {
      throw std::invalid_argument("select_top_c: scores must cover each file exactly once");
    }
    seen[sc.file] = true;
    keys[sc.file] = sc.ucb;
  }
  return top_c_by_value(keys, c);
}

// Fold one (features, observed demand) pair into the state. The inverse is
// advanced by the rank-one identity and periodically rebuilt (see constants).
inline void update(NodeLearnerState& s, const FeatureVector& x, double observed) {
  if (x.size() != s.h.size()) throw std::invalid_argument("update: feature dimension mismatch");
  if (!x.allFinite() || !std::isfinite(observed)) {
    throw std::invalid_argument("update: inputs must be finite");
  }
  const Eigen::VectorXd vx = s.V_inv * x;
  const double q = x.dot(vx);
  s.V.noalias() += x * x.transpose();
  s.h.noalias() += x * observed;
  s.V_inv.noalias() -= vx * vx.transpose() / (1.0 + q);
  ++s.updates_applied;
  if (s.updates_applied % kInverseRefactorPeriod == 0 ||
      inverse_residual(s) > kInverseCoherenceTol) {
    refactor_inverse(s);
  }
}

// --- checkpoint serialization ------------------------------------------------

inline nlohmann::json state_to_json(const NodeLearnerState& s) {
  const int d = s.dim();
  std::vector<double> v_flat;
  v_flat.reserve(static_cast<std::size_t>(d) * d);
  for (int r = 0; r < d; ++r) {
    for (int col = 0; col < d; ++col) v_flat.push_back(s.V(r, col));
  }
  return nlohmann::json{
      {"layout_version", 1},
      {"dim", d},
      {"ridge_lambda", s.ridge_lambda},
      {"updates_applied", s.updates_applied},
      {"v_row_major", v_flat},
      {"h", std::vector<double>(s.h.data(), s.h.data() + d)},
  };
}

// Rebuilds a state from its checkpoint. V_inv is not trusted from disk; it is
// re-derived so the coherence contract holds immediately after loading.
inline NodeLearnerState state_from_json(const nlohmann::json& j) {
  try {
    if (j.at("layout_version").get<int>() != 1) {
      throw std::runtime_error("state_from_json: unsupported layout_version");
    }
    const int d = j.at("dim").get<int>();
    if (d < 1) throw std::runtime_error("state_from_json: dim must be >= 1");
    const auto v_flat = j.at("v_row_major").get<std::vector<double>>();
    const auto h_flat = j.at("h").get<std::vector<double>>();
    if (v_flat.size() != static_cast<std::size_t>(d) * d || h_flat.size() != static_cast<std::size_t>(d)) {
      throw std::runtime_error("state_from_json: array lengths disagree with dim");
    }
    NodeLearnerState s;
    s.ridge_lambda = j.at("ridge_lambda").get<double>();
    s.updates_applied = j.at("updates_applied").get<long long>();
    s.V.resize(d, d);
    for (int r = 0; r < d; ++r) {
      for (int col = 0; col < d; ++col) s.V(r, col) = v_flat[static_cast<std::size_t>(r) * d + col];
    }
    s.h = Eigen::Map<const Eigen::VectorXd>(h_flat.data(), d);
    s.V_inv.resize(d, d);
    refactor_inverse(s);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("state_from_json: malformed checkpoint: ") + e.what());
  }
}

}  // namespace edgecache

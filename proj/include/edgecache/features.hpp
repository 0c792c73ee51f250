#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "edgecache/types.hpp"

namespace edgecache {

// Demand-window features for file f at node n when deciding slot t:
// component i holds the demand observed at slot t-1-i (most recent first),
// zero-filled where the history has nothing. Always length `window`.
inline FeatureVector extract_features(const DemandHistory& history, FileId f, NodeId n,
                                      SlotIndex t, int window) {
  if (window < 1) throw std::invalid_argument("extract_features: window must be >= 1");
  if (t < 1) throw std::invalid_argument("extract_features: slot must be >= 1");
  FeatureVector x(window);
  for (int i = 0; i < window; ++i) {
    const SlotIndex s = t - 1 - i;
    x[i] = (s >= 1) ? history.at(f, n, s) : 0.0;
  }
  return x;
}

// Rescale x onto the ball of radius `cap` when it sticks out; leave it alone
// otherwise. Idempotent, norm-non-increasing, direction-preserving.
inline FeatureVector cap_norm(const FeatureVector& x, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("cap_norm: cap must be > 0");
  const double norm = x.norm();
  if (norm <= cap) return x;
  return x * (cap / norm);
}

// Pluggable feature construction: the engine asks this for every (file, node)
// at the start of each slot. Must return vectors of the learner dimension.
using FeatureMap = std::function<FeatureVector(const DemandHistory&, FileId, NodeId, SlotIndex)>;

inline FeatureMap demand_window_map(int window) {
  return [window](const DemandHistory& h, FileId f, NodeId n, SlotIndex t) {
    return extract_features(h, f, n, t, window);
  };
}

}  // namespace edgecache

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rescbf/graph.hpp"

namespace rescbf {

template <typename Scalar>
struct NeighborValue {
  int node;
  Scalar value;
};

template <typename Scalar>
struct WmsrResult {
  Scalar value;
  std::vector<int> removed;  // the set R_i of discarded neighbors
};

/// Uniform weights over self plus at most n-1 kept neighbors give every kept
/// value a weight of at least 1/n, so the weight floor is beta = 1/n.
struct ConsensusConfig {
  int F = 0;
  double y_lo = -500.0;
  double y_hi = 500.0;
  double tolerance = 1e-3;
};

namespace detail {

// Sum in ascending order so the result does not depend on input order.
template <typename Scalar>
Scalar uniform_average(std::vector<Scalar>& values) {
  std::sort(values.begin(), values.end());
  Scalar sum{0};
  for (Scalar v : values) sum += v;
  return sum / static_cast<Scalar>(values.size());
}

}  // namespace detail

/// Nominal update with uniform weights 1/(k+1) over self and k neighbors.
template <typename Scalar>
Scalar linear_consensus_step(Scalar y_self, std::span<const NeighborValue<Scalar>> neighbors) {
  std::vector<Scalar> values{y_self};
  values.reserve(neighbors.size() + 1);
  for (const auto& nv : neighbors) values.push_back(nv.value);
  return detail::uniform_average(values);
}

/// W-MSR with parameter F: drop the F largest values strictly above y_self (all of
/// them if fewer than F), likewise below, then average the rest with self.
/// Equal values are never removal candidates.
template <typename Scalar>
WmsrResult<Scalar> wmsr_step(Scalar y_self, std::span<const NeighborValue<Scalar>> neighbors, int F) {
  if (F < 0) throw std::invalid_argument("wmsr_step: F must be >= 0");
  std::vector<NeighborValue<Scalar>> larger;
  std::vector<NeighborValue<Scalar>> smaller;
  std::vector<Scalar> kept{y_self};
  for (const auto& nv : neighbors) {
    if (nv.value > y_self)
      larger.push_back(nv);
    else if (nv.value < y_self)
      smaller.push_back(nv);
    else
      kept.push_back(nv.value);
  }
  std::stable_sort(larger.begin(), larger.end(),
                   [](const auto& a, const auto& b) { return a.value > b.value; });
  std::stable_sort(smaller.begin(), smaller.end(),
                   [](const auto& a, const auto& b) { return a.value < b.value; });

  WmsrResult<Scalar> out{};
  const auto drop = static_cast<std::size_t>(F);
  for (std::size_t k = 0; k < larger.size(); ++k) {
    if (k < drop)
      out.removed.push_back(larger[k].node);
    else
      kept.push_back(larger[k].value);
  }
  for (std::size_t k = 0; k < smaller.size(); ++k) {
    if (k < drop)
      out.removed.push_back(smaller[k].node);
    else
      kept.push_back(smaller[k].value);
  }
  out.value = detail::uniform_average(kept);
  return out;
}

/// Uniform draw from [cfg.y_lo, cfg.y_hi] built from 53 raw bits, so the
/// sequence is the same on every standard library.
inline double malicious_broadcast(std::mt19937_64& rng, const ConsensusConfig& cfg) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return cfg.y_lo + (cfg.y_hi - cfg.y_lo) * u;
}

struct ConsensusVerdict {
  bool converged = false;
  std::optional<double> limit_estimate;
  bool safety_held = true;
  double final_spread = 0.0;
  std::optional<int> violation_step;
  double envelope_lo = 0.0;
  double envelope_hi = 0.0;
};

/// `history[p]` holds all n values at consensus step p; only normal nodes are checked.
/// Safety: every normal value stays inside the envelope of normal initial values.
/// Convergence: spread of normal values at the last step <= tol.
ConsensusVerdict check_resilient_consensus(std::span<const std::vector<double>> history,
                                           const RoleAssignment& roles, double tol);

}  // namespace rescbf

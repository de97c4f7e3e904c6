#include "rescbf/consensus.hpp"

#include <limits>

namespace rescbf {

ConsensusVerdict check_resilient_consensus(std::span<const std::vector<double>> history,
                                           const RoleAssignment& roles, double tol) {
  if (history.empty()) throw std::invalid_argument("check_resilient_consensus: empty history");
  if (roles.normal().empty())
    throw std::invalid_argument("check_resilient_consensus: no normal nodes");
  for (const auto& row : history)
    if (static_cast<int>(row.size()) != roles.size())
      throw std::invalid_argument("check_resilient_consensus: row size does not match roles");

  ConsensusVerdict v;
  v.envelope_lo = std::numeric_limits<double>::infinity();
  v.envelope_hi = -std::numeric_limits<double>::infinity();
  for (int i : roles.normal()) {
    v.envelope_lo = std::min(v.envelope_lo, history.front()[static_cast<std::size_t>(i)]);
    v.envelope_hi = std::max(v.envelope_hi, history.front()[static_cast<std::size_t>(i)]);
  }

  for (std::size_t p = 0; p < history.size() && v.safety_held; ++p) {
    for (int i : roles.normal()) {
      const double y = history[p][static_cast<std::size_t>(i)];
      if (!(y >= v.envelope_lo && y <= v.envelope_hi)) {
        v.safety_held = false;
        v.violation_step = static_cast<int>(p);
        break;
      }
    }
  }

  const auto& last = history.back();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double sum = 0.0;
  for (int i : roles.normal()) {
    const double y = last[static_cast<std::size_t>(i)];
    lo = std::min(lo, y);
    hi = std::max(hi, y);
    sum += y;
  }
  v.final_spread = hi - lo;
  v.converged = v.final_spread <= tol;
  if (v.converged) v.limit_estimate = sum / static_cast<double>(roles.normal().size());
  return v;
}

}  // namespace rescbf

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "rescbf/graph.hpp"
#include "rescbf/types.hpp"

namespace rescbf {

/// w_r and w_c weight the degree and collision terms of the composed barrier;
/// gamma is the slope of the linear class-K function alpha(z) = gamma z.
template <typename Scalar>
struct CbfWeights {
  Scalar w_r{1};
  Scalar w_c{1};
  Scalar gamma{1};

  void validate() const {
    if (!(w_r > 0 && w_c > 0 && gamma > 0))
      throw std::invalid_argument("CbfWeights: w_r, w_c and gamma must be positive");
  }
};

template <typename Scalar>
struct NeighborInfo {
  int id;
  Vec<Scalar> position;
  Scalar connectivity;  // last broadcast c_k received from this neighbor
};

/// Everything robot i can sense or receive: its own state, its neighbors'
/// positions and their broadcast connectivity levels.
template <typename Scalar>
struct LocalView {
  int self_id = 0;
  Vec<Scalar> self_position;
  std::vector<NeighborInfo<Scalar>> neighbors;
  Scalar self_connectivity{0};
  int f_prime = 0;
  Scalar delta_d{0};
  AdjacencyParams<Scalar> params;
  CbfWeights<Scalar> weights;

  int dim() const { return static_cast<int>(self_position.size()); }
};

/// Halfplane H . u >= rhs.
template <typename Scalar>
struct ConstraintRow {
  Vec<Scalar> normal;
  Scalar rhs{0};
};

template <typename Scalar>
struct InputBox {
  Vec<Scalar> lo;
  Vec<Scalar> hi;

  static InputBox symmetric(int m, Scalar bound) {
    return InputBox{Vec<Scalar>::Constant(m, -bound), Vec<Scalar>::Constant(m, bound)};
  }

  int dim() const { return static_cast<int>(lo.size()); }

  void validate() const {
    if (lo.size() != hi.size() || lo.size() == 0)
      throw std::invalid_argument("InputBox: bounds must be nonempty and of equal size");
    if ((lo.array() > Scalar(0)).any() || (hi.array() < Scalar(0)).any())
      throw std::invalid_argument("InputBox: box must contain the origin");
  }

  template <typename Derived>
  Vec<Scalar> clamp(const Eigen::MatrixBase<Derived>& u) const {
    return u.cwiseMax(lo).cwiseMin(hi);
  }

  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& u, Scalar tol = Scalar(0)) const {
    return ((u.array() >= lo.array() - tol) && (u.array() <= hi.array() + tol)).all();
  }
};

// --- constraint functions -------------------------------------------------

/// h_i = sum_j a_ij - F', from measured neighbor positions.
template <typename Scalar>
Scalar degree_cbf(const LocalView<Scalar>& view) {
  Scalar sum{0};
  for (const auto& nb : view.neighbors)
    sum += adjacency_weight(view.self_position, nb.position, view.params);
  return sum - static_cast<Scalar>(view.f_prime);
}

/// Degree barrier reconstructed from a broadcast connectivity level.
template <typename Scalar>
Scalar hat_h(Scalar broadcast_c, int f_prime) {
  return broadcast_c - static_cast<Scalar>(f_prime);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar collision_cbf(const Eigen::MatrixBase<DerivedA>& xi,
                                        const Eigen::MatrixBase<DerivedB>& xj,
                                        typename DerivedA::Scalar delta_d) {
  return (xi - xj).squaredNorm() - delta_d * delta_d;
}

/// Centralized composition phi = 1 - sum_i E_i - sum_{(i,j)} E^c_ij. When
/// `broadcast` is given, E_i uses c_i - F' in place of the true h_i.
template <typename Derived>
typename Derived::Scalar composed_cbf(
    const Eigen::MatrixBase<Derived>& positions, const GraphSnapshot& g,
    const CbfWeights<typename Derived::Scalar>& w, int f_prime,
    const AdjacencyParams<typename Derived::Scalar>& params, typename Derived::Scalar delta_d,
    std::optional<std::span<const typename Derived::Scalar>> broadcast = std::nullopt) {
  using Scalar = typename Derived::Scalar;
  Scalar phi{1};
  for (int i = 0; i < g.size(); ++i) {
    const Scalar h = broadcast ? hat_h((*broadcast)[static_cast<std::size_t>(i)], f_prime)
                               : connectivity_level(i, g, positions, params) -
                                     static_cast<Scalar>(f_prime);
    phi -= std::exp(-w.w_r * h);
  }
  for (auto [i, j] : g.edges())
    phi -= std::exp(-w.w_c * collision_cbf(positions.col(i), positions.col(j), delta_d));
  return phi;
}

/// Robot i's share of the composed barrier:
///   phi_i = 1/n - sum_{k in B_i} Ehat_k / (F'+1) - sum_{j in N_i} E^c_ij / 2.
template <typename Scalar>
Scalar local_phi(const LocalView<Scalar>& view) {
  const auto& w = view.weights;
  Scalar degree_terms = std::exp(-w.w_r * hat_h(view.self_connectivity, view.f_prime));
  Scalar collision_terms{0};
  for (const auto& nb : view.neighbors) {
    degree_terms += std::exp(-w.w_r * hat_h(nb.connectivity, view.f_prime));
    collision_terms +=
        std::exp(-w.w_c * collision_cbf(view.self_position, nb.position, view.delta_d));
  }
  return Scalar(1) / static_cast<Scalar>(view.params.n) -
         degree_terms / static_cast<Scalar>(view.f_prime + 1) - collision_terms / Scalar(2);
}

/// H_i = w_r sum_{k in B_i} Ehat_k dh_k/dx_i + w_c sum_{j in N_i} E^c_ij 2(x_i - x_j),
/// rhs = -gamma phi_i. Only a_ik depends on x_i among the terms of h_k (k != i), so
/// each neighbor contributes w_r (Ehat_i + Ehat_k) da_ik/dx_i.
template <typename Scalar>
ConstraintRow<Scalar> constraint_row(const LocalView<Scalar>& view) {
  const auto& w = view.weights;
  const Scalar e_self = std::exp(-w.w_r * hat_h(view.self_connectivity, view.f_prime));
  Vec<Scalar> H = Vec<Scalar>::Zero(view.dim());
  for (const auto& nb : view.neighbors) {
    const Scalar e_k = std::exp(-w.w_r * hat_h(nb.connectivity, view.f_prime));
    const Vec<Scalar> diff = view.self_position - nb.position;
    const Scalar e_col = std::exp(-w.w_c * collision_cbf(view.self_position, nb.position, view.delta_d));
    H += w.w_r * (e_self + e_k) * adjacency_weight_gradient(view.self_position, nb.position, view.params);
    H += (w.w_c * e_col * Scalar(2)) * diff;
  }
  return ConstraintRow<Scalar>{std::move(H), -w.gamma * local_phi(view)};
}

// --- QP -------------------------------------------------------------------

enum class QpStatus {
  kOptimal,         // constraint handled exactly
  kVoidConstraint,  // ||H|| below threshold, constraint ignored
  kInfeasible,      // no box point satisfies the halfplane; fallback applied
};

template <typename Scalar>
struct QpSolution {
  Vec<Scalar> u;
  QpStatus status = QpStatus::kOptimal;
};

inline constexpr double kVoidNormalThreshold = 1e-12;

/// Exact minimizer of ||u - u_des||^2 over {u in box : H . u >= rhs}.
///
/// The multiplier path u(lambda) = clamp(u_des + lambda H) makes H . u(lambda)
/// nondecreasing and piecewise linear in lambda >= 0; the optimum is the clamped
/// desired input when that is feasible, otherwise the point where the path meets
/// the halfplane, located exactly between consecutive clamp breakpoints.
///
/// If even max_{box} H . u < rhs the instance is infeasible and the least-violating
/// box vertex is returned (free axes, H_j = 0, keep the clamped desired value).
template <typename Scalar>
QpSolution<Scalar> solve_box_qp(const Vec<Scalar>& u_des, const ConstraintRow<Scalar>& row,
                                const InputBox<Scalar>& box) {
  const Eigen::Index m = u_des.size();
  if (row.normal.size() != m || box.lo.size() != m)
    throw std::invalid_argument("solve_box_qp: dimension mismatch");

  Vec<Scalar> clamped = box.clamp(u_des);
  if (row.normal.norm() < Scalar(kVoidNormalThreshold))
    return {std::move(clamped), QpStatus::kVoidConstraint};
  if (row.normal.dot(clamped) >= row.rhs) return {std::move(clamped), QpStatus::kOptimal};

  const Vec<Scalar>& H = row.normal;
  Vec<Scalar> best = clamped;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (H(j) > 0) best(j) = box.hi(j);
    if (H(j) < 0) best(j) = box.lo(j);
  }
  if (H.dot(best) < row.rhs) return {std::move(best), QpStatus::kInfeasible};

  std::vector<Scalar> breaks{Scalar(0)};
  for (Eigen::Index j = 0; j < m; ++j) {
    if (H(j) == Scalar(0)) continue;
    for (Scalar bound : {box.lo(j), box.hi(j)}) {
      const Scalar lam = (bound - u_des(j)) / H(j);
      if (lam > 0) breaks.push_back(lam);
    }
  }
  std::sort(breaks.begin(), breaks.end());

  auto along = [&](Scalar lam) -> Vec<Scalar> { return box.clamp(u_des + lam * H); };
  Scalar lam_lo = 0;
  Scalar g_lo = H.dot(clamped);
  for (std::size_t k = 1; k < breaks.size(); ++k) {
    const Scalar lam_hi = breaks[k];
    const Scalar g_hi = H.dot(along(lam_hi));
    if (g_hi >= row.rhs) {
      // g is affine on [lam_lo, lam_hi]
      const Scalar t = (g_hi > g_lo) ? (row.rhs - g_lo) / (g_hi - g_lo) : Scalar(1);
      Vec<Scalar> u = along(lam_lo + t * (lam_hi - lam_lo));
      return {std::move(u), QpStatus::kOptimal};
    }
    lam_lo = lam_hi;
    g_lo = g_hi;
  }
  // Past the last breakpoint every axis with H_j != 0 is saturated.
  return {std::move(best), QpStatus::kOptimal};
}

template <typename Scalar>
struct ControllerOutput {
  Vec<Scalar> u;
  Scalar phi{0};
  ConstraintRow<Scalar> row;
  QpStatus status = QpStatus::kOptimal;
};

/// Per-robot CBF-QP: stay as close to u_des as the local barrier allows.
template <typename Scalar>
ControllerOutput<Scalar> cbf_qp_controller(const LocalView<Scalar>& view, const Vec<Scalar>& u_des,
                                           const InputBox<Scalar>& box) {
  ControllerOutput<Scalar> out;
  out.phi = local_phi(view);
  out.row = constraint_row(view);
  auto sol = solve_box_qp(u_des, out.row, box);
  out.u = std::move(sol.u);
  out.status = sol.status;
  return out;
}

}  // namespace rescbf

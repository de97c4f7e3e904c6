#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rescbf/types.hpp"

namespace rescbf {

/// Parameters of the smooth adjacency weight
///   a_ij = q1 / (1 + exp(-q2 (R^2 - d^2)^2)) - q1 / 2   for d <= R, else 0.
/// With q1 = 2 + eps, 0 < eps < 1/(n-1), every weight stays below 1 + 1/(n-1),
/// so a weighted degree of at least F' certifies at least F' neighbors.
template <typename Scalar>
struct AdjacencyParams {
  Scalar q1{2.05};
  Scalar q2{1};
  Scalar R{3};
  int n{11};

  /// q1 = 2 + 0.5/(n-1), q2 = 1.
  static AdjacencyParams defaults(int n, Scalar R) {
    if (n < 2) throw std::invalid_argument("AdjacencyParams: n must be >= 2");
    return AdjacencyParams{Scalar(2) + Scalar(0.5) / Scalar(n - 1), Scalar(1), R, n};
  }

  Scalar max_weight_bound() const { return Scalar(1) + Scalar(1) / Scalar(n - 1); }

  void validate() const {
    if (n < 2) throw std::invalid_argument("AdjacencyParams: n must be >= 2");
    if (!(q2 > 0)) throw std::invalid_argument("AdjacencyParams: q2 must be positive");
    if (!(R > 0)) throw std::invalid_argument("AdjacencyParams: R must be positive");
    const Scalar eps = q1 - Scalar(2);
    if (!(eps > 0 && eps < Scalar(1) / Scalar(n - 1)))
      throw std::invalid_argument("AdjacencyParams: q1 must be 2 + eps with 0 < eps < 1/(n-1)");
  }
};

using AdjacencyParamsd = AdjacencyParams<double>;

namespace detail {

template <typename Scalar>
Scalar logistic(Scalar z) {
  return Scalar(1) / (Scalar(1) + std::exp(-z));
}

}  // namespace detail

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar adjacency_weight(const Eigen::MatrixBase<DerivedA>& xi,
                                           const Eigen::MatrixBase<DerivedB>& xj,
                                           const AdjacencyParams<typename DerivedA::Scalar>& p) {
  using Scalar = typename DerivedA::Scalar;
  if (!xi.allFinite() || !xj.allFinite())
    throw std::invalid_argument("adjacency_weight: non-finite position");
  const Scalar d2 = (xi - xj).squaredNorm();
  const Scalar r2 = p.R * p.R;
  if (d2 > r2) return Scalar(0);
  const Scalar z = r2 - d2;
  return p.q1 * detail::logistic(p.q2 * z * z) - p.q1 / Scalar(2);
}

/// Gradient of a_ij with respect to x_i. Vanishes at d = R, where the weight is C^1.
template <typename DerivedA, typename DerivedB>
Vec<typename DerivedA::Scalar> adjacency_weight_gradient(
    const Eigen::MatrixBase<DerivedA>& xi, const Eigen::MatrixBase<DerivedB>& xj,
    const AdjacencyParams<typename DerivedA::Scalar>& p) {
  using Scalar = typename DerivedA::Scalar;
  const Vec<Scalar> diff = xi - xj;
  const Scalar d2 = diff.squaredNorm();
  const Scalar r2 = p.R * p.R;
  if (d2 > r2) return Vec<Scalar>::Zero(diff.size());
  const Scalar z = r2 - d2;
  const Scalar s = detail::logistic(p.q2 * z * z);
  // d/dx_i [q1 s(q2 z^2)] with dz/dx_i = -2 (x_i - x_j)
  return (Scalar(-4) * p.q1 * p.q2 * s * (Scalar(1) - s) * z) * diff;
}

/// Undirected simple graph over nodes 0..n-1.
class GraphSnapshot {
 public:
  using Edge = std::pair<int, int>;

  GraphSnapshot() = default;
  /// Throws on self-loops or out-of-range endpoints; duplicate edges collapse.
  GraphSnapshot(int n, std::span<const Edge> edges);

  int size() const noexcept { return n_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(static_cast<std::size_t>(i)); }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
  bool has_edge(int i, int j) const;
  /// Sorted (i < j) pairs.
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  int min_degree() const;

  /// Bitmask of neighbors; valid only for n <= 64.
  std::uint64_t neighbor_mask(int i) const;

  friend bool operator==(const GraphSnapshot&, const GraphSnapshot&) = default;

 private:
  int n_ = 0;
  std::vector<std::vector<int>> neighbors_;
  std::vector<Edge> edges_;
};

/// Edge (i, j) iff ||x_i - x_j|| <= R. Positions are columns.
template <typename Derived>
GraphSnapshot build_graph(const Eigen::MatrixBase<Derived>& positions,
                          typename Derived::Scalar R) {
  const int n = static_cast<int>(positions.cols());
  if (n < 2) throw std::invalid_argument("build_graph: need at least 2 positions");
  if (!positions.allFinite()) throw std::invalid_argument("build_graph: non-finite position");
  const auto r2 = R * R;
  std::vector<GraphSnapshot::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((positions.col(i) - positions.col(j)).squaredNorm() <= r2) edges.emplace_back(i, j);
  return GraphSnapshot(n, edges);
}

/// c_i = sum of a_ij over the neighbors of i.
template <typename Derived>
typename Derived::Scalar connectivity_level(int i, const GraphSnapshot& g,
                                            const Eigen::MatrixBase<Derived>& positions,
                                            const AdjacencyParams<typename Derived::Scalar>& p) {
  typename Derived::Scalar c{0};
  for (int j : g.neighbors(i)) c += adjacency_weight(positions.col(i), positions.col(j), p);
  return c;
}

/// Partition of the nodes into normal and malicious sets under an F-total model.
class RoleAssignment {
 public:
  RoleAssignment() = default;
  RoleAssignment(int n, int F, std::vector<int> malicious);

  int size() const noexcept { return n_; }
  int F() const noexcept { return F_; }
  bool is_malicious(int i) const { return malicious_flag_.at(static_cast<std::size_t>(i)); }
  const std::vector<int>& malicious() const noexcept { return malicious_; }
  const std::vector<int>& normal() const noexcept { return normal_; }

 private:
  int n_ = 0;
  int F_ = 0;
  std::vector<int> malicious_;
  std::vector<int> normal_;
  std::vector<bool> malicious_flag_;
};

struct DegreeStats {
  int min_all = 0;
  int min_normal = 0;
  std::vector<int> degrees;
};

DegreeStats degree_stats(const GraphSnapshot& g, const RoleAssignment& roles);

/// F' = F + floor(n/2): normal-agent degree sufficient for W-MSR resilient consensus.
int required_degree_threshold(int n, int F);

/// At least s nodes of S have at least r neighbors outside S.
bool is_rs_reachable(const GraphSnapshot& g, std::span<const int> S, int r, int s);

struct RobustnessResult {
  bool robust = true;
  std::vector<int> witness_s1;
  std::vector<int> witness_s2;
  explicit operator bool() const noexcept { return robust; }
};

inline constexpr int kDefaultRobustnessCap = 12;

/// Exhaustive (r,s)-robustness check over all pairs of nonempty disjoint subsets.
/// Throws CapacityError when n exceeds `cap` (never truncates).
RobustnessResult is_rs_robust(const GraphSnapshot& g, int r, int s,
                              int cap = kDefaultRobustnessCap);

/// Degree-based robustness bound: r = delta_min - floor(n/2) + 1 when
/// delta_min >= floor(n/2) - 1, in which case the graph is (r,s)-robust for 1 <= s <= n.
/// May return 0 at the edge of the hypothesis.
std::optional<int> lemma1_bound(const GraphSnapshot& g);

/// `i j` per line, 0-based; `#` starts a comment. A `# n: K` comment fixes the node
/// count, otherwise it is one more than the largest index seen.
GraphSnapshot read_edge_list(std::istream& in);
void write_edge_list(std::ostream& out, const GraphSnapshot& g);

}  // namespace rescbf

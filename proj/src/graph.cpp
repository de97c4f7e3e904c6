#include "rescbf/graph.hpp"

#include <algorithm>
#include <bit>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

namespace rescbf {

GraphSnapshot::GraphSnapshot(int n, std::span<const Edge> edges) : n_(n) {
  if (n < 0) throw std::invalid_argument("GraphSnapshot: negative node count");
  neighbors_.assign(static_cast<std::size_t>(n), {});
  edges_.reserve(edges.size());
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n)
      throw std::invalid_argument("GraphSnapshot: edge endpoint out of range");
    if (a == b) throw std::invalid_argument("GraphSnapshot: self-loop");
    edges_.emplace_back(std::min(a, b), std::max(a, b));
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (auto [a, b] : edges_) {
    neighbors_[static_cast<std::size_t>(a)].push_back(b);
    neighbors_[static_cast<std::size_t>(b)].push_back(a);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool GraphSnapshot::has_edge(int i, int j) const {
  const auto& nb = neighbors(i);
  return std::binary_search(nb.begin(), nb.end(), j);
}

int GraphSnapshot::min_degree() const {
  int m = std::numeric_limits<int>::max();
  for (int i = 0; i < n_; ++i) m = std::min(m, degree(i));
  return n_ == 0 ? 0 : m;
}

std::uint64_t GraphSnapshot::neighbor_mask(int i) const {
  if (n_ > 64) throw CapacityError("neighbor_mask: graph has more than 64 nodes");
  std::uint64_t m = 0;
  for (int j : neighbors(i)) m |= std::uint64_t{1} << j;
  return m;
}

RoleAssignment::RoleAssignment(int n, int F, std::vector<int> malicious)
    : n_(n), F_(F), malicious_(std::move(malicious)) {
  if (n < 2) throw std::invalid_argument("RoleAssignment: n must be >= 2");
  if (F < 0 || F > (n - 1) / 2)
    throw std::invalid_argument("RoleAssignment: F must lie in [0, floor((n-1)/2)]");
  std::sort(malicious_.begin(), malicious_.end());
  if (std::adjacent_find(malicious_.begin(), malicious_.end()) != malicious_.end())
    throw std::invalid_argument("RoleAssignment: duplicate malicious index");
  if (static_cast<int>(malicious_.size()) > F)
    throw std::invalid_argument("RoleAssignment: more malicious nodes than F (not F-total)");
  malicious_flag_.assign(static_cast<std::size_t>(n), false);
  for (int i : malicious_) {
    if (i < 0 || i >= n) throw std::invalid_argument("RoleAssignment: malicious index out of range");
    malicious_flag_[static_cast<std::size_t>(i)] = true;
  }
  for (int i = 0; i < n; ++i)
    if (!malicious_flag_[static_cast<std::size_t>(i)]) normal_.push_back(i);
}

DegreeStats degree_stats(const GraphSnapshot& g, const RoleAssignment& roles) {
  if (roles.size() != g.size())
    throw std::invalid_argument("degree_stats: role assignment size does not match graph");
  if (roles.normal().empty()) throw std::invalid_argument("degree_stats: no normal nodes");
  DegreeStats out;
  out.degrees.resize(static_cast<std::size_t>(g.size()));
  out.min_all = std::numeric_limits<int>::max();
  out.min_normal = std::numeric_limits<int>::max();
  for (int i = 0; i < g.size(); ++i) {
    const int d = g.degree(i);
    out.degrees[static_cast<std::size_t>(i)] = d;
    out.min_all = std::min(out.min_all, d);
    if (!roles.is_malicious(i)) out.min_normal = std::min(out.min_normal, d);
  }
  return out;
}

int required_degree_threshold(int n, int F) {
  if (n < 2) throw std::invalid_argument("required_degree_threshold: n must be >= 2");
  if (F < 0 || F > (n - 1) / 2)
    throw std::invalid_argument("required_degree_threshold: F must lie in [0, floor((n-1)/2)]");
  return F + n / 2;
}

bool is_rs_reachable(const GraphSnapshot& g, std::span<const int> S, int r, int s) {
  const int n = g.size();
  std::vector<bool> in(static_cast<std::size_t>(n), false);
  int members = 0;
  for (int i : S) {
    if (i < 0 || i >= n) throw std::invalid_argument("is_rs_reachable: node out of range");
    if (!in[static_cast<std::size_t>(i)]) ++members;
    in[static_cast<std::size_t>(i)] = true;
  }
  if (members == 0 || members == n)
    throw std::invalid_argument("is_rs_reachable: S must be a nonempty proper subset");
  if (r < 0 || s < 0) throw std::invalid_argument("is_rs_reachable: r and s must be >= 0");
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (!in[static_cast<std::size_t>(i)]) continue;
    int outside = 0;
    for (int j : g.neighbors(i))
      if (!in[static_cast<std::size_t>(j)]) ++outside;
    if (outside >= r) ++count;
  }
  return count >= s;
}

namespace {

std::vector<int> mask_to_nodes(std::uint32_t mask) {
  std::vector<int> out;
  for (int i = 0; mask != 0; ++i, mask >>= 1)
    if (mask & 1u) out.push_back(i);
  return out;
}

}  // namespace

RobustnessResult is_rs_robust(const GraphSnapshot& g, int r, int s, int cap) {
  constexpr int kHardCap = 24;
  const int n = g.size();
  if (n > cap || n > kHardCap)
    throw CapacityError("is_rs_robust: n = " + std::to_string(n) + " exceeds enumeration cap " +
                        std::to_string(std::min(cap, kHardCap)));
  RobustnessResult result;
  if (n < 2) return result;

  std::vector<std::uint32_t> nbr(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) nbr[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(g.neighbor_mask(i));

  // |X^r_S| for every subset S.
  const std::uint32_t full = (std::uint32_t{1} << n) - 1;
  std::vector<std::uint8_t> reach(std::size_t{full} + 1, 0);
  for (std::uint32_t S = 1; S <= full; ++S) {
    int count = 0;
    for (std::uint32_t rest = S; rest != 0; rest &= rest - 1) {
      const int i = std::countr_zero(rest);
      if (std::popcount(nbr[static_cast<std::size_t>(i)] & ~S) >= r) ++count;
    }
    reach[S] = static_cast<std::uint8_t>(count);
  }

  // Ternary labelling (S1, S2, neither); the unordered pair is visited once by
  // requiring the lowest labelled node to sit in S1.
  for (std::uint32_t S1 = 1; S1 <= full; ++S1) {
    const std::uint32_t rest = full & ~S1;
    const int x1 = reach[S1];
    const bool s1_all = x1 == std::popcount(S1);
    if (s1_all) continue;
    for (std::uint32_t S2 = rest; S2 != 0; S2 = (S2 - 1) & rest) {
      const std::uint32_t both = S1 | S2;
      if ((both & (~both + 1)) & S2) continue;
      const int x2 = reach[S2];
      if (x2 == std::popcount(S2)) continue;
      if (x1 + x2 >= s) continue;
      result.robust = false;
      result.witness_s1 = mask_to_nodes(S1);
      result.witness_s2 = mask_to_nodes(S2);
      return result;
    }
  }
  return result;
}

std::optional<int> lemma1_bound(const GraphSnapshot& g) {
  const int n = g.size();
  if (n == 0) return std::nullopt;
  const int dmin = g.min_degree();
  if (dmin < n / 2 - 1) return std::nullopt;
  return dmin - n / 2 + 1;
}

GraphSnapshot read_edge_list(std::istream& in) {
  std::vector<GraphSnapshot::Edge> edges;
  int declared = -1;
  int max_index = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      std::istringstream comment(line.substr(hash + 1));
      std::string key;
      int value = 0;
      if (comment >> key && (key == "n:" || key == "n") && comment >> value) declared = value;
      line.erase(hash);
    }
    std::istringstream fields(line);
    int a = 0;
    int b = 0;
    if (!(fields >> a)) continue;
    std::string extra;
    if (!(fields >> b) || (fields >> extra))
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected `i j`");
    if (a < 0 || b < 0)
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": negative index");
    max_index = std::max({max_index, a, b});
    edges.emplace_back(a, b);
  }
  const int n = declared >= 0 ? declared : max_index + 1;
  if (max_index >= n) throw std::invalid_argument("edge list: index exceeds declared node count");
  return GraphSnapshot(n, edges);
}

void write_edge_list(std::ostream& out, const GraphSnapshot& g) {
  out << "# n: " << g.size() << '\n';
  for (auto [a, b] : g.edges()) out << a << ' ' << b << '\n';
}

}  // namespace rescbf

#pragma once

// Ranked enumeration of label subsets by total node cost, posed as K-shortest
// S->E paths in the DAG whose nodes are the labels sorted by cost and whose
// edges only run from earlier to later nodes. Every S->E path visits a distinct
// subset, so the K shortest paths are the K cheapest subsets.
//
// Node costs may be negative. The graph is acyclic, so a single Bellman-Ford
// sweep in topological order settles every node; keeping the K best partial
// paths per node (instead of one distance) gives the ranked enumeration.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "glmb/error.hpp"
#include "glmb/label.hpp"

namespace glmb {

struct NodeCostVector {
  std::vector<Label> labels;
  std::vector<double> costs;  // -ln odds, one per label
};

struct RankedSubset {
  std::vector<std::size_t> members;  // indices into the input, ascending
  std::vector<Label> labels;         // member labels, ascending
  double total_cost = 0.0;
};

inline constexpr std::size_t kMaxSubsetNodes = 63;

namespace detail {

struct SubsetPath {
  double cost = 0.0;
  std::uint32_t size = 0;
  std::uint64_t mask = 0;  // bit r set <=> label of rank r is a member
};

// Cost, then cardinality, then lexicographic order on the sorted label
// sequence. For equal-size sets A <lex B iff min(A xor B) is in A, which is
// preserved when both sets are extended by the same disjoint suffix.
inline bool path_before(const SubsetPath& a, const SubsetPath& b) {
  if (a.cost != b.cost) return a.cost < b.cost;
  if (a.size != b.size) return a.size < b.size;
  const std::uint64_t diff = a.mask ^ b.mask;
  if (diff == 0) return false;
  return (a.mask & (diff & (~diff + 1))) != 0;
}

inline void keep_best(std::vector<SubsetPath>& paths, std::size_t k) {
  if (paths.size() > k) {
    std::nth_element(paths.begin(), paths.begin() + static_cast<std::ptrdiff_t>(k - 1), paths.end(),
                     path_before);
    paths.resize(k);
  }
  std::sort(paths.begin(), paths.end(), path_before);
}

}  // namespace detail

/// The min(K, 2^n) cheapest subsets in non-decreasing total cost. Ties go to
/// the smaller subset, then to the lexicographically smaller label sequence.
inline std::vector<RankedSubset> k_shortest_subsets(const NodeCostVector& nodes, std::size_t K) {
  if (K == 0) throw InputError("k_shortest_subsets: K must be at least 1");
  const std::size_t n = nodes.labels.size();
  if (nodes.costs.size() != n) {
    throw InputError("k_shortest_subsets: " + std::to_string(n) + " labels but " +
                     std::to_string(nodes.costs.size()) + " costs");
  }
  if (n > kMaxSubsetNodes) {
    throw InputError("k_shortest_subsets: at most " + std::to_string(kMaxSubsetNodes) + " nodes supported");
  }
  for (double c : nodes.costs) {
    if (!std::isfinite(c)) throw InputError("k_shortest_subsets: node costs must be finite");
  }

  // rank[i]: position of label i in ascending label order.
  std::vector<std::size_t> by_label(n);
  std::iota(by_label.begin(), by_label.end(), std::size_t{0});
  std::sort(by_label.begin(), by_label.end(),
            [&](std::size_t a, std::size_t b) { return nodes.labels[a] < nodes.labels[b]; });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (r > 0 && nodes.labels[by_label[r]] == nodes.labels[by_label[r - 1]]) {
      throw InputError("k_shortest_subsets: duplicate label");
    }
    rank[by_label[r]] = r;
  }

  // Topological order of the DAG: non-decreasing cost, ties by label.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (nodes.costs[a] != nodes.costs[b]) return nodes.costs[a] < nodes.costs[b];
    return rank[a] < rank[b];
  });

  const std::size_t k = n < 64 ? std::min<std::uint64_t>(K, std::uint64_t{1} << n) : K;
  std::vector<std::vector<detail::SubsetPath>> best(n);
  std::vector<detail::SubsetPath> candidates;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t v = order[t];
    const double c = nodes.costs[v];
    const std::uint64_t bit = std::uint64_t{1} << rank[v];
    candidates.clear();
    candidates.push_back({c, 1, bit});  // edge S -> v
    for (std::size_t s = 0; s < t; ++s) {
      for (const auto& p : best[s]) candidates.push_back({p.cost + c, p.size + 1, p.mask | bit});
    }
    detail::keep_best(candidates, k);
    best[t] = candidates;
  }

  candidates.clear();
  candidates.push_back({0.0, 0, 0});  // edge S -> E
  for (const auto& list : best) candidates.insert(candidates.end(), list.begin(), list.end());
  detail::keep_best(candidates, k);

  std::vector<RankedSubset> out;
  out.reserve(candidates.size());
  for (auto& p : candidates) {
    RankedSubset s;
    for (std::size_t r = 0; r < n; ++r) {
      if (p.mask & (std::uint64_t{1} << r)) s.labels.push_back(nodes.labels[by_label[r]]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (p.mask & (std::uint64_t{1} << rank[i])) {
        s.members.push_back(i);
        s.total_cost += nodes.costs[i];
      }
    }
    p.cost = s.total_cost;  // canonical summation order
    out.push_back(std::move(s));
  }
  // Re-rank on the canonical sums so near-ties are ordered consistently.
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return detail::path_before(candidates[a], candidates[b]);
  });
  std::vector<RankedSubset> sorted;
  sorted.reserve(out.size());
  for (std::size_t i : idx) sorted.push_back(std::move(out[i]));
  return sorted;
}

}  // namespace glmb

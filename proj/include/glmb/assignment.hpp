#pragma once

// Optimal and ranked (Murty) assignment over rectangular track x measurement
// cost matrices where every track may alternatively be misdetected at cost 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glmb/error.hpp"

namespace glmb {

/// Entry value for a forbidden (track, measurement) pairing.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Dense row-major cost matrix. Entries are finite or +inf.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Builds from nested rows; throws InputError on ragged rows or NaN / -inf entries.
  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t m = n == 0 ? 0 : rows.front().size();
    CostMatrix c(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      if (rows[i].size() != m) {
        throw InputError("cost matrix row " + std::to_string(i) + " has " +
                         std::to_string(rows[i].size()) + " entries, expected " + std::to_string(m));
      }
      for (std::size_t j = 0; j < m; ++j) c(i, j) = rows[i][j];
    }
    c.validate();
    return c;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> data() const noexcept { return data_; }

  void validate() const {
    for (std::size_t k = 0; k < data_.size(); ++k) {
      const double v = data_[k];
      if (std::isnan(v) || v == -std::numeric_limits<double>::infinity()) {
        throw InputError("cost matrix entry (" + std::to_string(k / std::max<std::size_t>(cols_, 1)) +
                         "," + std::to_string(k % std::max<std::size_t>(cols_, 1)) +
                         ") is NaN or -inf");
      }
    }
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One entry per track row: 0 = misdetected, j >= 1 = assigned measurement j (1-based).
using AssociationMap = std::vector<int>;

struct RankedSolution {
  AssociationMap map;
  double cost = 0.0;  // sum of selected entries, misdetections contribute 0
};

/// Sum of the selected entries in row order. Misdetections add nothing.
inline double association_cost(const CostMatrix& cost, const AssociationMap& map) {
  double total = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (map[i] > 0) total += cost(i, static_cast<std::size_t>(map[i] - 1));
  }
  return total;
}

/// Appends an |I| x |I| block with 0 on the diagonal and +inf elsewhere, so
/// that row i taking column |Z|+i encodes a misdetection of track i.
inline CostMatrix extend_for_misdetection(const CostMatrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  CostMatrix ext(n, m + n, kForbidden);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) ext(i, j) = cost(i, j);
    ext(i, m + i) = 0.0;
  }
  return ext;
}

namespace detail {

/// Shortest augmenting path solver (Hungarian with potentials, Jonker-Volgenant
/// style) for an n x m row-major matrix with n <= m. +inf entries are missing
/// edges. Returns the column of every row, or nullopt if no complete row
/// matching exists.
inline std::optional<std::vector<int>> solve_rectangular(std::span<const double> a, std::size_t n,
                                                         std::size_t m) {
  std::vector<int> row_to_col(n, -1);
  if (n == 0) return row_to_col;
  if (n > m) return std::nullopt;
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based internally; index 0 is the virtual root column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* arow = a.data() + (i0 - 1) * m;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double c = arow[j - 1];
        if (c != inf) {
          const double cur = c - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) return std::nullopt;
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

inline AssociationMap to_association(const std::vector<int>& ext_cols, std::size_t meas) {
  AssociationMap map(ext_cols.size());
  for (std::size_t i = 0; i < ext_cols.size(); ++i) {
    map[i] = static_cast<std::size_t>(ext_cols[i]) < meas ? ext_cols[i] + 1 : 0;
  }
  return map;
}

/// Relative slack under which two solution costs count as tied.
inline bool cost_tied_or_less(double a, double b) {
  return a <= b + 1e-10 * std::max(1.0, std::abs(b));
}

}  // namespace detail

/// Minimum-cost association map; misdetected tracks contribute 0.
inline RankedSolution solve_optimal_assignment(const CostMatrix& cost) {
  cost.validate();
  if (cost.rows() == 0) return {};
  const CostMatrix ext = extend_for_misdetection(cost);
  auto cols = detail::solve_rectangular(ext.data(), ext.rows(), ext.cols());
  // The diagonal block always admits the all-misdetected solution.
  RankedSolution out;
  out.map = detail::to_association(*cols, cost.cols());
  out.cost = association_cost(cost, out.map);
  return out;
}

/// The min(T, #maps) lowest-cost association maps in non-decreasing cost
/// order, equal costs ordered lexicographically by map. Murty partitioning
/// over the misdetection-extended matrix.
inline std::vector<RankedSolution> ranked_assignments(const CostMatrix& cost, std::size_t T) {
  if (T == 0) throw InputError("ranked_assignments: T must be at least 1");
  cost.validate();
  const std::size_t n = cost.rows();
  const std::size_t meas = cost.cols();
  if (n == 0) return {RankedSolution{}};

  const CostMatrix ext = extend_for_misdetection(cost);
  const std::size_t M = ext.cols();

  struct Node {
    std::vector<int> cols;  // extended column of each row
    AssociationMap map;
    double cost = 0.0;
    std::size_t fixed = 0;                      // rows [0, fixed) are forced to cols
    std::vector<std::pair<int, int>> excluded;  // (row, ext col), rows >= fixed
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.cost != b.cost) return a.cost > b.cost;
    return a.map > b.map;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);

  // Solves the subproblem with rows [0, fixed) forced to `forced` and the
  // `excluded` pairs removed.
  std::vector<double> reduced;
  std::vector<int> free_cols;
  std::vector<char> col_taken(M);
  auto solve_node = [&](const std::vector<int>& forced, std::size_t fixed,
                        std::vector<std::pair<int, int>> excluded) -> std::optional<Node> {
    std::fill(col_taken.begin(), col_taken.end(), 0);
    for (std::size_t r = 0; r < fixed; ++r) col_taken[static_cast<std::size_t>(forced[r])] = 1;
    free_cols.clear();
    for (std::size_t c = 0; c < M; ++c) {
      if (!col_taken[c]) free_cols.push_back(static_cast<int>(c));
    }
    const std::size_t rn = n - fixed;
    const std::size_t rm = free_cols.size();
    reduced.assign(rn * rm, kForbidden);
    for (std::size_t r = 0; r < rn; ++r) {
      for (std::size_t c = 0; c < rm; ++c) {
        reduced[r * rm + c] = ext(fixed + r, static_cast<std::size_t>(free_cols[c]));
      }
    }
    for (const auto& [r, c] : excluded) {
      const auto it = std::lower_bound(free_cols.begin(), free_cols.end(), c);
      if (it != free_cols.end() && *it == c) {
        reduced[(static_cast<std::size_t>(r) - fixed) * rm +
                static_cast<std::size_t>(it - free_cols.begin())] = kForbidden;
      }
    }
    auto sol = detail::solve_rectangular(reduced, rn, rm);
    if (!sol) return std::nullopt;
    Node node;
    node.cols.assign(forced.begin(), forced.begin() + static_cast<std::ptrdiff_t>(fixed));
    for (int c : *sol) node.cols.push_back(free_cols[static_cast<std::size_t>(c)]);
    node.map = detail::to_association(node.cols, meas);
    node.cost = association_cost(cost, node.map);
    node.fixed = fixed;
    node.excluded = std::move(excluded);
    return node;
  };

  if (auto root = solve_node({}, 0, {})) heap.push(std::move(*root));

  std::vector<RankedSolution> results;
  std::set<AssociationMap> seen;
  double boundary = kForbidden;
  while (!heap.empty()) {
    if (results.size() >= T && !detail::cost_tied_or_less(heap.top().cost, boundary)) break;
    Node node = heap.top();
    heap.pop();
    if (seen.insert(node.map).second) {
      results.push_back({node.map, node.cost});
      if (results.size() == T) boundary = node.cost;
    }
    // Partition the remaining solutions of this node's space.
    for (std::size_t i = node.fixed; i < n; ++i) {
      std::vector<std::pair<int, int>> excluded;
      for (const auto& e : node.excluded) {
        if (static_cast<std::size_t>(e.first) >= i) excluded.push_back(e);
      }
      excluded.emplace_back(static_cast<int>(i), node.cols[i]);
      if (auto child = solve_node(node.cols, i, std::move(excluded))) heap.push(std::move(*child));
    }
  }

  std::stable_sort(results.begin(), results.end(), [](const RankedSolution& a, const RankedSolution& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.map < b.map;
  });
  if (results.size() > T) results.resize(T);
  return results;
}

}  // namespace glmb

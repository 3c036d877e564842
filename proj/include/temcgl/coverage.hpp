#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/graph.hpp"
#include "temcgl/rng.hpp"

namespace temcgl {

namespace detail {

inline std::vector<char> membership(std::size_t n, std::span<const NodeId> nodes) {
  std::vector<char> in(n, 0);
  for (NodeId v : nodes) {
    if (v >= n) throw std::out_of_range("node " + std::to_string(v) + " outside graph");
    in[v] = 1;
  }
  return in;
}

}  // namespace detail

/// Fraction of `universe` lying inside the union of the selected nodes'
/// L-hop ego-subnetworks. Covered nodes outside the universe are not counted.
inline double coverage_ratio(const Graph& g, std::span<const NodeId> nodes, std::size_t hops,
                             std::span<const NodeId> universe) {
  if (universe.empty()) throw std::invalid_argument("coverage_ratio: empty universe");
  const auto in_universe = detail::membership(g.num_nodes(), universe);
  std::vector<char> covered(g.num_nodes(), 0);
  std::size_t count = 0;
  for (NodeId v : nodes) {
    for (NodeId w : l_hop_neighborhood(g, v, hops)) {
      if (in_universe[w] && !covered[w]) {
        covered[w] = 1;
        ++count;
      }
    }
  }
  std::size_t universe_size = 0;
  for (char c : in_universe) universe_size += c;
  return static_cast<double>(count) / static_cast<double>(universe_size);
}

/// Singleton coverage ratios R_c({v}) for each candidate, with the candidate
/// set itself as the universe. Entry i belongs to candidates[i].
inline std::vector<double> singleton_coverage_table(const Graph& g, std::span<const NodeId> candidates,
                                                    std::size_t hops) {
  std::vector<double> table(candidates.size(), 0.0);
  if (candidates.empty()) return table;
  const auto in_universe = detail::membership(g.num_nodes(), candidates);
  std::size_t universe_size = 0;
  for (char c : in_universe) universe_size += c;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::size_t count = 0;
    for (NodeId w : l_hop_neighborhood(g, candidates[i], hops)) count += in_universe[w];
    table[i] = static_cast<double>(count) / static_cast<double>(universe_size);
  }
  return table;
}

/// Sequential weighted sampling without replacement: each draw picks index i
/// among the remaining ones with probability w_i / sum(remaining w), by
/// inverting the running cumulative sum. Returns indices in draw order.
inline std::vector<std::size_t> weighted_sample_without_replacement(std::span<const double> weights,
                                                                    std::size_t n, Rng& rng) {
  if (n > weights.size()) {
    throw std::invalid_argument("weighted sampling: budget " + std::to_string(n) + " exceeds " +
                                std::to_string(weights.size()) + " candidates");
  }
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("weighted sampling: weights must be finite and >= 0");
  }
  std::vector<std::size_t> remaining(weights.size());
  for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (picked.size() < n) {
    double total = 0.0;
    for (std::size_t i : remaining) total += weights[i];
    std::size_t chosen = remaining.size() - 1;
    if (total > 0.0) {
      const double target = unif(rng) * total;
      double cum = 0.0;
      for (std::size_t k = 0; k < remaining.size(); ++k) {
        cum += weights[remaining[k]];
        if (target < cum) {
          chosen = k;
          break;
        }
      }
      // Rounding can leave target >= the final cumulative sum; fall back to
      // the last index with positive weight.
      while (weights[remaining[chosen]] == 0.0 && chosen > 0) --chosen;
    } else {
      // Only zero-weight items left: draw uniformly among them.
      chosen = std::uniform_int_distribution<std::size_t>(0, remaining.size() - 1)(rng);
    }
    picked.push_back(remaining[chosen]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  return picked;
}

/// Coverage maximization sampling: n distinct candidates drawn without
/// replacement with probability proportional to their singleton coverage ratio.
inline std::vector<NodeId> coverage_max_sample(const Graph& g, std::span<const NodeId> candidates,
                                               std::size_t hops, std::size_t n, Rng& rng) {
  if (hops < 1) throw std::invalid_argument("coverage_max_sample: hops must be >= 1");
  if (n > candidates.size()) {
    throw std::invalid_argument("coverage_max_sample: budget " + std::to_string(n) + " exceeds " +
                                std::to_string(candidates.size()) + " candidates");
  }
  const auto table = singleton_coverage_table(g, candidates, hops);
  std::vector<NodeId> out;
  out.reserve(n);
  for (std::size_t i : weighted_sample_without_replacement(table, n, rng)) out.push_back(candidates[i]);
  return out;
}

}  // namespace temcgl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "temcgl/graph.hpp"
#include "temcgl/rng.hpp"

namespace temcgl {

struct SbmParams {
  std::vector<std::size_t> block_sizes;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double feature_shift = 1.0;
  /// Log-normal sigma of per-node degree propensities; 0 gives a plain SBM.
  double degree_skew = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const SbmParams&, const SbmParams&) = default;
};

/// Stochastic block model. Block k is class k; features are the class mean
/// (feature_shift on axis k mod feature_dim) plus unit Gaussian noise; splits
/// are 60/20/20 per class.
///
/// With degree_skew > 0 each node draws a propensity theta ~ LogNormal(0, skew),
/// normalized to mean one, and an edge (u, v) appears with probability
/// min(1, p * theta_u * theta_v).
inline Graph generate_sbm(const SbmParams& p) {
  if (p.block_sizes.empty()) throw std::invalid_argument("generate_sbm: no blocks");
  if (p.p_in < 0.0 || p.p_in > 1.0 || p.p_out < 0.0 || p.p_out > 1.0) {
    throw std::invalid_argument("generate_sbm: probabilities must lie in [0, 1]");
  }
  if (p.feature_dim == 0) throw std::invalid_argument("generate_sbm: feature_dim must be >= 1");
  if (p.degree_skew < 0.0) throw std::invalid_argument("generate_sbm: degree_skew must be >= 0");

  const std::size_t n = std::accumulate(p.block_sizes.begin(), p.block_sizes.end(), std::size_t{0});
  const std::size_t c = p.block_sizes.size();
  std::vector<ClassId> labels;
  labels.reserve(n);
  for (std::size_t k = 0; k < c; ++k) labels.insert(labels.end(), p.block_sizes[k], static_cast<ClassId>(k));

  Rng edge_rng = make_rng(p.seed, "sbm.edges");
  Rng feat_rng = make_rng(p.seed, "sbm.features");
  Rng split_rng = make_rng(p.seed, "sbm.splits");

  std::vector<double> theta(n, 1.0);
  if (p.degree_skew > 0.0) {
    Rng theta_rng = make_rng(p.seed, "sbm.theta");
    std::lognormal_distribution<double> ln(0.0, p.degree_skew);
    double sum = 0.0;
    for (double& t : theta) {
      t = ln(theta_rng);
      sum += t;
    }
    for (double& t : theta) t *= static_cast<double>(n) / sum;
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      const double base = labels[u] == labels[v] ? p.p_in : p.p_out;
      const double prob = std::min(1.0, base * theta[u] * theta[v]);
      if (unif(edge_rng) < prob) edges.emplace_back(u, v);
    }
  }

  Matrix features(n, p.feature_dim);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (NodeId v = 0; v < n; ++v) {
    for (std::size_t k = 0; k < p.feature_dim; ++k) features(v, k) = noise(feat_rng);
    features(v, labels[v] % p.feature_dim) += p.feature_shift;
  }

  std::vector<Split> split(n, Split::kTest);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t m = p.block_sizes[k];
    std::vector<NodeId> members(m);
    std::iota(members.begin(), members.end(), static_cast<NodeId>(offset));
    std::shuffle(members.begin(), members.end(), split_rng);
    const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(m)));
    const auto n_valid = std::min(m - n_train, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(m))));
    for (std::size_t i = 0; i < m; ++i) {
      split[members[i]] = i < n_train ? Split::kTrain : (i < n_train + n_valid ? Split::kValid : Split::kTest);
    }
    offset += m;
  }
  return Graph::from_edges(n, edges, std::move(features), std::move(labels), std::move(split), c);
}

}  // namespace temcgl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/graph.hpp"
#include "temcgl/propagation.hpp"
#include "temcgl/rng.hpp"

namespace temcgl {

struct PseudoGradientResult {
  /// Gradient of -log (W e_v)_k with respect to W (C x b).
  Matrix lhs;
  /// Sum over the ego-subnetwork of re-weighted pseudo-labeled gradients.
  Matrix rhs;
  double max_abs_deviation = 0.0;
  std::vector<NodeId> ego_nodes;
  /// pi(v, w) for each ego node.
  std::vector<double> propagation_weights;
  /// f(x_w)_k * pi(v, w) / sum_w' f(x_w' pi(v, w'))_k for each ego node.
  std::vector<double> rescale_weights;
};

struct PseudoGradientOptions {
  /// Added to the first ego node's rescale weight. Nonzero values exist only
  /// to confirm the check can fail.
  double weight_perturbation = 0.0;
};

/// Gradient identity behind the pseudo-training effect, for a bias-free linear
/// head f(e) = W e and loss -log f(.)_k on raw outputs:
///
///   grad_W[-log (W e_v)_k]
///     = sum_w  [(W x_w)_k pi(v,w) / sum_w' (W x_w' pi(v,w'))_k] * grad_W[-log (W x_w)_k]
///
/// The left side uses the TE from the propagation operator; the right side
/// uses only pi(v, .) and the raw features of v's ego-subnetwork.
inline PseudoGradientResult pseudo_gradient_check(const NormalizedAdjacency& adj, const Matrix& features,
                                                  NodeId v, const Matrix& weight, ClassId k,
                                                  const PropagationStrategy& strategy,
                                                  PseudoGradientOptions options = {}) {
  if (!strategy.linear()) throw std::invalid_argument("pseudo_gradient_check: strategy must be linear");
  if (v >= adj.size()) throw std::out_of_range("pseudo_gradient_check: node out of range");
  if (weight.cols() != features.cols()) throw std::invalid_argument("pseudo_gradient_check: W columns != feature dim");
  if (k >= weight.rows()) throw std::invalid_argument("pseudo_gradient_check: class out of range");
  const std::size_t b = features.cols();

  auto linear_k = [&](std::span<const double> x) {
    auto w = weight.row(k);
    double acc = 0.0;
    for (std::size_t c = 0; c < b; ++c) acc += w[c] * x[c];
    return acc;
  };

  PseudoGradientResult res;
  res.lhs = Matrix(weight.rows(), b);
  res.rhs = Matrix(weight.rows(), b);

  // Left side: through the embedding.
  const TEMatrix tes = compute_tes(adj, features, strategy);
  const auto ev = tes.row(v);
  const double zk = linear_k(ev);
  if (!(zk > 0.0)) {
    throw std::domain_error("pseudo_gradient_check: non-positive output " + std::to_string(zk) + " at class " +
                            std::to_string(k));
  }
  for (std::size_t c = 0; c < b; ++c) res.lhs(k, c) = -ev[c] / zk;

  // Right side: pi(v, w) from propagating indicator columns of the ego nodes.
  res.ego_nodes = bfs_ball(adj.matrix.row_ptr, adj.matrix.col, v, strategy.hops);
  const std::size_t m = res.ego_nodes.size();
  Matrix indicators(adj.size(), m);
  for (std::size_t j = 0; j < m; ++j) indicators(res.ego_nodes[j], j) = 1.0;
  const TEMatrix pi = compute_tes(adj, indicators, strategy);
  res.propagation_weights.resize(m);
  for (std::size_t j = 0; j < m; ++j) res.propagation_weights[j] = pi.values(v, j);

  std::vector<double> fk(m);
  double denom = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto xw = features.row(res.ego_nodes[j]);
    fk[j] = linear_k(xw);
    if (!(fk[j] > 0.0)) {
      throw std::domain_error("pseudo_gradient_check: non-positive output at class " + std::to_string(k) +
                              " for ego node " + std::to_string(res.ego_nodes[j]));
    }
    std::vector<double> scaled(xw.begin(), xw.end());
    for (double& x : scaled) x *= res.propagation_weights[j];
    denom += linear_k(scaled);
  }
  res.rescale_weights.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    res.rescale_weights[j] = fk[j] * res.propagation_weights[j] / denom;
  }
  if (m > 0) res.rescale_weights[0] += options.weight_perturbation;
  for (std::size_t j = 0; j < m; ++j) {
    const auto xw = features.row(res.ego_nodes[j]);
    for (std::size_t c = 0; c < b; ++c) res.rhs(k, c) += res.rescale_weights[j] * (-xw[c] / fk[j]);
  }

  for (std::size_t i = 0; i < res.lhs.values().size(); ++i) {
    res.max_abs_deviation = std::max(res.max_abs_deviation, std::abs(res.lhs.values()[i] - res.rhs.values()[i]));
  }
  return res;
}


struct TheoremTrial {
  PropagationStrategy strategy;
  std::size_t num_nodes = 0;
  NodeId node = 0;
  double deviation = 0.0;
};

struct TheoremReport {
  std::vector<TheoremTrial> trials;
  double max_deviation = 0.0;

  bool passed(double tolerance) const { return max_deviation < tolerance; }
};

/// Random small instances: up to 10 nodes, edge probability 0.4, 4 positive
/// features, 3 classes with positive weights (so every output is positive).
/// Strategies cycle through S1 (self-loops on), S2 and S3 (self-loops off)
/// with hops in {1, 2, 3}.
inline TheoremReport run_theorem_trials(std::uint64_t seed, std::size_t trials, PseudoGradientOptions options = {}) {
  constexpr std::size_t kMaxNodes = 10;
  constexpr std::size_t kDim = 4;
  constexpr std::size_t kClasses = 3;
  TheoremReport report;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, "theorem", t);
    std::uniform_real_distribution<double> pos(0.1, 1.0);
    std::bernoulli_distribution edge(0.4);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, kMaxNodes)(rng);
    const std::size_t hops = std::uniform_int_distribution<std::size_t>(1, 3)(rng);

    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId w = u + 1; w < n; ++w) {
        if (edge(rng)) edges.emplace_back(u, w);
      }
    }
    Matrix x(n, kDim);
    for (double& e : x.values()) e = pos(rng);
    Matrix weight(kClasses, kDim);
    for (double& e : weight.values()) e = pos(rng);
    const Graph g = Graph::from_edges(n, edges, x, std::vector<ClassId>(n, 0), std::vector<Split>(n, Split::kTrain), 1);

    PropagationStrategy strategy;
    switch (t % 3) {
      case 0: strategy = PropagationStrategy::s1(hops); break;
      case 1: strategy = PropagationStrategy::s2(hops, pos(rng)); break;
      default: strategy = PropagationStrategy::s3(hops, pos(rng)); break;
    }
    const auto adj = normalize_adjacency(g, strategy.default_self_loops());
    const auto v = std::uniform_int_distribution<NodeId>(0, static_cast<NodeId>(n - 1))(rng);
    const auto k = std::uniform_int_distribution<ClassId>(0, kClasses - 1)(rng);
    const auto r = pseudo_gradient_check(adj, g.features(), v, weight, k, strategy, options);
    report.trials.push_back({strategy, n, v, r.max_abs_deviation});
    report.max_deviation = std::max(report.max_deviation, r.max_abs_deviation);
  }
  return report;
}

}  // namespace temcgl

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "support/oracles.hpp"
#include "temcgl/propagation.hpp"

using namespace temcgl;

namespace {

std::vector<PropagationStrategy> linear_strategies() {
  return {PropagationStrategy::s1(1), PropagationStrategy::s1(3), PropagationStrategy::s2(2, 0.1),
          PropagationStrategy::s2(4, 0.5), PropagationStrategy::s3(2, 0.2), PropagationStrategy::s3(5, 0.7)};
}

double max_abs_diff(const Matrix& a, const oracle::Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) m = std::max(m, std::abs(a(i, j) - b[i][j]));
  }
  return m;
}

Graph relabel(const Graph& g, const std::vector<NodeId>& perm) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v : g.neighbors(u)) edges.emplace_back(perm[u], perm[v]);
  }
  Matrix x(g.num_nodes(), g.feature_dim());
  std::vector<ClassId> labels(g.num_nodes());
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    std::copy(g.features().row(u).begin(), g.features().row(u).end(), x.row(perm[u]).begin());
    labels[perm[u]] = g.label(u);
  }
  return Graph::from_edges(g.num_nodes(), edges, x, labels, std::vector<Split>(g.num_nodes(), Split::kTrain),
                           g.num_classes());
}

}  // namespace

TEST(Propagation, S2AlphaOneIsIdentity) {
  const Graph g = oracle::random_graph(30, 0.2, 4, 1);
  for (std::size_t hops : {1, 2, 5}) {
    const auto tes = compute_tes(normalize_adjacency(g, false), g.features(), PropagationStrategy::s2(hops, 1.0));
    EXPECT_EQ(tes.values, g.features());
  }
}

TEST(Propagation, S1OnEdgelessGraphWithSelfLoopsIsIdentity) {
  const Graph g = oracle::random_graph(10, 0.0, 3, 2);
  const auto tes = compute_tes(normalize_adjacency(g, true), g.features(), PropagationStrategy::s1(4));
  EXPECT_EQ(tes.values, g.features());
}

TEST(Propagation, S1OneHopOnPath) {
  Matrix x(3, 2);
  x(0, 0) = 1.0, x(0, 1) = 2.0, x(1, 0) = -3.0, x(1, 1) = 0.5, x(2, 0) = 4.0, x(2, 1) = 1.0;
  const std::vector<std::pair<NodeId, NodeId>> edges{{0, 1}, {1, 2}};
  const Graph g = Graph::from_edges(3, edges, x, {0, 0, 0}, std::vector<Split>(3, Split::kTrain), 1);
  const auto tes = compute_tes(normalize_adjacency(g, false), x, PropagationStrategy::s1(1));
  EXPECT_NEAR(tes.values(1, 0), (1.0 + 4.0) / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(tes.values(1, 1), (2.0 + 1.0) / std::sqrt(2.0), 1e-15);
}

TEST(Propagation, MatchesDenseOracle) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Graph g = oracle::random_graph(20 + 10 * seed, 0.08, 5, seed);
    for (const auto& s : linear_strategies()) {
      const bool loops = s.default_self_loops();
      const auto tes = compute_tes(normalize_adjacency(g, loops), g.features(), s);
      const auto pi = oracle::propagation_matrix(s, oracle::normalized_adjacency(g, loops));
      EXPECT_LT(max_abs_diff(tes.values, oracle::mul(pi, oracle::from_matrix(g.features()))), 1e-10);
    }
  }
}

TEST(Propagation, Linearity) {
  const Graph g = oracle::random_graph(50, 0.1, 3, 9);
  const Graph h = oracle::random_graph(50, 0.0, 3, 10);
  const Matrix& x = g.features();
  const Matrix& y = h.features();
  const double a = 1.7, b = -0.4;
  Matrix combo(50, 3);
  for (std::size_t i = 0; i < combo.values().size(); ++i) combo.values()[i] = a * x.values()[i] + b * y.values()[i];
  const auto adj = normalize_adjacency(g, true);
  for (const auto& s : linear_strategies()) {
    const auto ex = compute_tes(adj, x, s), ey = compute_tes(adj, y, s), ec = compute_tes(adj, combo, s);
    for (std::size_t i = 0; i < combo.values().size(); ++i) {
      EXPECT_NEAR(ec.values.values()[i], a * ex.values.values()[i] + b * ey.values.values()[i], 1e-10);
    }
  }
}

TEST(Propagation, PermutationEquivariance) {
  const Graph g = oracle::random_graph(40, 0.1, 3, 4);
  std::vector<NodeId> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  const Graph h = relabel(g, perm);
  auto strategies = linear_strategies();
  strategies.push_back(PropagationStrategy::reservoir_computing(2, {8, 0.0, 3}));
  for (const auto& s : strategies) {
    const auto eg = compute_tes(normalize_adjacency(g, true), g.features(), s);
    const auto eh = compute_tes(normalize_adjacency(h, true), h.features(), s);
    for (NodeId v = 0; v < 40; ++v) {
      for (std::size_t c = 0; c < eg.dim(); ++c) EXPECT_NEAR(eg.values(v, c), eh.values(perm[v], c), 1e-12);
    }
  }
}

TEST(Propagation, LocalityOfS1) {
  const Graph g = oracle::random_graph(60, 0.05, 3, 12);
  const auto adj = normalize_adjacency(g, true);
  const auto s = PropagationStrategy::s1(2);
  const auto full = compute_tes(adj, g.features(), s);
  for (NodeId v = 0; v < 60; v += 5) {
    const auto ball = oracle::ball(g, v, 2);
    Matrix masked = g.features();
    for (NodeId u = 0; u < 60; ++u) {
      if (!ball.contains(u)) std::fill(masked.row(u).begin(), masked.row(u).end(), 0.0);
    }
    const auto local = compute_tes(adj, masked, s);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(local.values(v, c), full.values(v, c));
  }
}

TEST(Propagation, EncodeNodeIsBitIdenticalToFullRow) {
  const Graph g = oracle::random_graph(80, 0.05, 4, 21);
  auto strategies = linear_strategies();
  strategies.push_back(PropagationStrategy::reservoir_computing(3, {6, 0.0, 1}));
  for (const auto& s : strategies) {
    const auto adj = normalize_adjacency(g, s.default_self_loops());
    const TopologyEncoder enc(s, 4);
    const auto full = enc.encode(adj, g.features());
    for (NodeId v = 0; v < 80; v += 3) {
      const auto row = enc.encode_node(adj, g.features(), v);
      EXPECT_TRUE(std::equal(row.begin(), row.end(), full.row(v).begin(), full.row(v).end()));
    }
  }
}

TEST(Reservoir, DeterministicAndBounded) {
  const Graph g = oracle::random_graph(30, 0.2, 5, 8);
  const auto s = PropagationStrategy::reservoir_computing(3, {16, 0.0, 77});
  const auto adj = normalize_adjacency(g, false);
  const auto a = compute_tes(adj, g.features(), s);
  const auto b = compute_tes(adj, g.features(), s);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.dim(), 16u);
  for (double x : a.values.values()) EXPECT_LE(std::abs(x), 1.0);
  const auto other = compute_tes(adj, g.features(), PropagationStrategy::reservoir_computing(3, {16, 0.0, 78}));
  EXPECT_NE(a.values, other.values);
}

TEST(Reservoir, AutoScaleBoundsRecurrentSpectralNorm) {
  const auto w = make_reservoir_weights(5, {32, 0.0, 4});
  EXPECT_NEAR(spectral_norm_estimate(w.neighbor, 50), 0.9, 1e-9);
  const auto fixed = make_reservoir_weights(5, {32, 0.25, 4});
  for (double x : fixed.neighbor.values()) EXPECT_LE(std::abs(x), 0.25);
}

TEST(Propagation, RejectsBadInputs) {
  const Graph g = oracle::random_graph(10, 0.3, 2, 5);
  const auto adj = normalize_adjacency(g, true);
  EXPECT_THROW(compute_tes(adj, Matrix(9, 2), PropagationStrategy::s1(1)), std::invalid_argument);
  Matrix bad = g.features();
  bad(3, 1) = std::nan("");
  EXPECT_THROW(compute_tes(adj, bad, PropagationStrategy::s1(1)), std::invalid_argument);
  EXPECT_THROW(PropagationStrategy::s2(2, 1.5).validate(), std::invalid_argument);
  EXPECT_THROW(PropagationStrategy::s1(0).validate(), std::invalid_argument);
}

TEST(TeExport, BinaryRoundTripAndCsvShape) {
  const Graph g = oracle::random_graph(12, 0.3, 3, 6);
  const auto tes = compute_tes(normalize_adjacency(g, false), g.features(), PropagationStrategy::s3(2, 0.3));
  const auto dir = std::filesystem::temp_directory_path() / "temcgl_te_export";
  std::filesystem::create_directories(dir);
  write_te_binary(tes, dir / "te.bin");
  const auto back = read_te_binary(dir / "te.bin");
  EXPECT_EQ(back.values, tes.values);
  EXPECT_EQ(back.strategy, tes.strategy);
  EXPECT_EQ(back.self_loops, tes.self_loops);

  write_te_csv(tes, dir / "te.csv");
  std::ifstream in(dir / "te.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "node,e0,e1,e2");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 12u);
}

TEST(TeExport, RejectsCorruptFile) {
  const auto path = std::filesystem::temp_directory_path() / "temcgl_te_bad.bin";
  std::ofstream(path, std::ios::binary) << "NOPE";
  EXPECT_THROW(read_te_binary(path), std::runtime_error);
}

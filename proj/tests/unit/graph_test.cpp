#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "support/oracles.hpp"
#include "temcgl/graph.hpp"
#include "temcgl/graph_io.hpp"
#include "temcgl/sbm.hpp"

using namespace temcgl;

namespace {

constexpr std::size_t kGoldenSbmEdges = 555;

Graph make_graph(std::size_t n, std::vector<std::pair<NodeId, NodeId>> edges, std::vector<ClassId> labels = {}) {
  if (labels.empty()) labels.assign(n, 0);
  std::size_t classes = 1;
  for (auto c : labels) classes = std::max<std::size_t>(classes, c + 1);
  return Graph::from_edges(n, edges, Matrix(n, 2), labels, std::vector<Split>(n, Split::kTrain), classes);
}

Graph path(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return make_graph(n, e);
}

}  // namespace

TEST(Graph, FromEdgesSymmetrizesAndDedupes) {
  const Graph g = make_graph(3, {{0, 1}, {1, 0}, {1, 2}, {2, 2}});
  EXPECT_EQ(g.num_edges(), 2u);
  EXPECT_EQ(g.degree(1), 2u);
  EXPECT_EQ(g.degree(0), 1u);
}

TEST(Graph, RejectsMalformedCsr) {
  EXPECT_THROW(Graph({0, 1, 1}, {1}, Matrix(2, 1), {0, 0}, {Split::kTrain, Split::kTrain}, 1), std::invalid_argument);
  EXPECT_THROW(Graph({0, 1, 2}, {0, 0}, Matrix(2, 1), {0, 0}, {Split::kTrain, Split::kTrain}, 1),
               std::invalid_argument);
  EXPECT_THROW(Graph({0, 1, 2}, {1, 0}, Matrix(2, 1), {0, 5}, {Split::kTrain, Split::kTrain}, 2),
               std::invalid_argument);
}

TEST(Normalize, TriangleWithoutSelfLoops) {
  const Graph g = make_graph(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto a = normalize_adjacency(g, false).matrix.to_dense();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(a(i, j), i == j ? 0.0 : 0.5);
  }
}

TEST(Normalize, IsolatedNodeRowAndColumnZero) {
  const Graph g = make_graph(3, {{0, 1}});
  const auto a = normalize_adjacency(g, false).matrix.to_dense();
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(a(2, j), 0.0);
    EXPECT_EQ(a(j, 2), 0.0);
  }
}

TEST(Normalize, PathMatchesDenseOracle) {
  const Graph g = path(3);
  const auto a = normalize_adjacency(g, false).matrix.to_dense();
  const auto ref = oracle::normalized_adjacency(g, false);
  EXPECT_NEAR(a(0, 1), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(a(1, 2), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_EQ(a(0, 2), 0.0);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(a(i, j), ref[i][j], 1e-15);
  }
}

TEST(Normalize, SymmetricAndSpectrallyBoundedOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Graph g = oracle::random_graph(40, 0.1, 2, seed);
    for (bool loops : {false, true}) {
      const auto adj = normalize_adjacency(g, loops);
      const auto a = adj.matrix.to_dense();
      const auto ref = oracle::normalized_adjacency(g, loops);
      for (std::size_t i = 0; i < 40; ++i) {
        for (std::size_t j = 0; j < 40; ++j) {
          EXPECT_EQ(a(i, j), a(j, i));
          EXPECT_NEAR(a(i, j), ref[i][j], 1e-14);
        }
      }
      EXPECT_LE(spectral_norm_estimate(a, 100), 1.0 + 1e-9);
    }
  }
}

TEST(Ball, ZeroHopsIsSelf) {
  const Graph g = path(4);
  EXPECT_EQ(l_hop_neighborhood(g, 2, 0), std::vector<NodeId>{2});
}

TEST(Ball, StarCenterOneHopIsEverything) {
  const Graph g = make_graph(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  EXPECT_EQ(l_hop_neighborhood(g, 0, 1).size(), 5u);
}

TEST(Ball, PathEndpointTwoHops) {
  const Graph g = path(6);
  const auto b = l_hop_neighborhood(g, 0, 2);
  EXPECT_EQ(b, (std::vector<NodeId>{0, 1, 2}));
  const auto ref = oracle::ball(g, 0, 2);
  EXPECT_EQ(std::vector<NodeId>(ref.begin(), ref.end()), b);
}

TEST(Ball, MatchesOracleOnRandomGraphs) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = oracle::random_graph(60, 0.05, 1, seed);
    for (NodeId v = 0; v < 60; v += 7) {
      for (std::size_t hops = 0; hops <= 3; ++hops) {
        const auto ref = oracle::ball(g, v, hops);
        EXPECT_EQ(l_hop_neighborhood(g, v, hops), std::vector<NodeId>(ref.begin(), ref.end()));
      }
    }
  }
}

TEST(Ball, OutOfRangeNodeThrows) { EXPECT_THROW(l_hop_neighborhood(path(3), 3, 1), std::out_of_range); }

TEST(Homophily, SingleEdgeSameLabel) { EXPECT_DOUBLE_EQ(homophily_ratio(make_graph(2, {{0, 1}}, {1, 1})), 1.0); }

TEST(Homophily, HalfOfFourEdges) {
  const Graph g = make_graph(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}, {0, 0, 1, 1, 0});
  EXPECT_DOUBLE_EQ(homophily_ratio(g), 0.5);
}

TEST(Homophily, NoEdgesIsAnError) { EXPECT_THROW(homophily_ratio(make_graph(3, {})), std::domain_error); }

TEST(Sbm, DisjointTriangles) {
  const Graph g = generate_sbm({{3, 3}, 1.0, 0.0, 4, 1.0, 0.0, 1});
  EXPECT_EQ(g.num_edges(), 6u);
  EXPECT_DOUBLE_EQ(homophily_ratio(g), 1.0);
}

TEST(Sbm, CompleteBipartite) {
  const Graph g = generate_sbm({{2, 2}, 0.0, 1.0, 4, 1.0, 0.0, 1});
  EXPECT_EQ(g.num_edges(), 4u);
  EXPECT_DOUBLE_EQ(homophily_ratio(g), 0.0);
}

TEST(Sbm, DeterministicForSeed) {
  const SbmParams p{{50, 50}, 0.2, 0.02, 8, 1.0, 0.0, 7};
  const Graph a = generate_sbm(p);
  const Graph b = generate_sbm(p);
  EXPECT_EQ(a, b);
  // Recorded at first build.
  EXPECT_EQ(a.num_edges(), kGoldenSbmEdges);
}

TEST(Sbm, SplitsAreSixtyTwentyTwentyPerClass) {
  const Graph g = generate_sbm({{100, 50}, 0.1, 0.01, 4, 1.0, 0.0, 3});
  std::size_t train0 = 0, valid0 = 0, test1 = 0;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (g.label(v) == 0 && g.split(v) == Split::kTrain) ++train0;
    if (g.label(v) == 0 && g.split(v) == Split::kValid) ++valid0;
    if (g.label(v) == 1 && g.split(v) == Split::kTest) ++test1;
  }
  EXPECT_EQ(train0, 60u);
  EXPECT_EQ(valid0, 20u);
  EXPECT_EQ(test1, 10u);
}

TEST(Sbm, DegreeSkewWidensDegreeSpread) {
  auto max_degree = [](const Graph& g) {
    std::size_t m = 0;
    for (NodeId v = 0; v < g.num_nodes(); ++v) m = std::max(m, g.degree(v));
    return m;
  };
  const Graph flat = generate_sbm({{200, 200}, 0.02, 0.002, 4, 1.0, 0.0, 5});
  const Graph skew = generate_sbm({{200, 200}, 0.02, 0.002, 4, 1.0, 1.5, 5});
  EXPECT_GT(max_degree(skew), 2 * max_degree(flat));
}

TEST(GraphIo, RoundTrip) {
  const Graph g = generate_sbm({{10, 10}, 0.3, 0.05, 3, 1.0, 0.0, 11});
  const auto dir = std::filesystem::temp_directory_path() / "temcgl_graph_io";
  std::filesystem::create_directories(dir);
  const GraphFiles files{dir / "e.txt", dir / "f.txt", dir / "l.txt", dir / "s.txt"};
  save_graph(g, files);
  EXPECT_EQ(load_graph(files), g);
}

TEST(GraphIo, RejectsMismatchedRows) {
  const auto dir = std::filesystem::temp_directory_path() / "temcgl_graph_io_bad";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "e.txt") << "0 1\n";
  std::ofstream(dir / "f.txt") << "1.0\n2.0\n";
  std::ofstream(dir / "l.txt") << "0\n1\n0\n";
  std::ofstream(dir / "s.txt") << "train\ntrain\ntest\n";
  EXPECT_THROW(load_graph({dir / "e.txt", dir / "f.txt", dir / "l.txt", dir / "s.txt"}), std::runtime_error);
}

TEST(GraphIo, MissingFileNamesPath) {
  try {
    read_labels("/nonexistent/labels.txt");
    FAIL() << "expected an exception";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/labels.txt"), std::string::npos);
  }
}

TEST(Graph, FilterEdgesKeepsNodes) {
  const Graph g = path(4);
  const Graph h = g.filter_edges([](NodeId u, NodeId) { return u != 1; });
  EXPECT_EQ(h.num_nodes(), 4u);
  EXPECT_EQ(h.num_edges(), 2u);
  EXPECT_EQ(h.degree(2), 1u);
}

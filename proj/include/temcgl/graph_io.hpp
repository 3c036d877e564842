#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "temcgl/graph.hpp"

namespace temcgl {

struct GraphFiles {
  std::filesystem::path edges;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::filesystem::path splits;
};

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return in;
}

inline bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::vector<std::pair<NodeId, NodeId>> read_edge_list(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line) || line[0] == '#') continue;
    std::istringstream ss(line);
    long long u = -1, v = -1;
    std::string extra;
    if (!(ss >> u >> v) || (ss >> extra) || u < 0 || v < 0) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": expected 'u v' with non-negative ids");
    }
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  return edges;
}

inline Matrix read_features(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    std::size_t count = 0;
    for (double x; ss >> x; ++count) data.push_back(x);
    if (!ss.eof()) throw std::runtime_error(path.string() + ": non-numeric feature on row " + std::to_string(rows));
    if (rows == 0) cols = count;
    if (count != cols || count == 0) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows) + " has " +
                               std::to_string(count) + " values, expected " + std::to_string(cols));
    }
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

inline std::vector<ClassId> read_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<ClassId> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::blank(line)) continue;
    std::istringstream ss(line);
    long long y = -1;
    std::string extra;
    if (!(ss >> y) || (ss >> extra) || y < 0) {
      throw std::runtime_error(path.string() + ": bad label line '" + line + "'");
    }
    labels.push_back(static_cast<ClassId>(y));
  }
  return labels;
}

inline std::vector<Split> read_splits(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::vector<Split> splits;
  std::string token;
  while (in >> token) splits.push_back(parse_split(token));
  return splits;
}

/// Loads a graph from the four text files. Node count comes from the label
/// file; every other file must agree with it.
inline Graph load_graph(const GraphFiles& files) {
  auto labels = read_labels(files.labels);
  auto features = read_features(files.features);
  auto splits = read_splits(files.splits);
  auto edges = read_edge_list(files.edges);
  const std::size_t n = labels.size();
  if (features.rows() != n) {
    throw std::runtime_error("feature file has " + std::to_string(features.rows()) +
                             " rows but label file has " + std::to_string(n));
  }
  if (splits.size() != n) {
    throw std::runtime_error("split file has " + std::to_string(splits.size()) +
                             " entries but label file has " + std::to_string(n));
  }
  const std::size_t num_classes = n == 0 ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  return Graph::from_edges(n, edges, std::move(features), std::move(labels), std::move(splits), num_classes);
}

inline void save_graph(const Graph& g, const GraphFiles& files) {
  std::ofstream e(files.edges), f(files.features), l(files.labels), s(files.splits);
  if (!e || !f || !l || !s) throw std::runtime_error("cannot open graph output files for writing");
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    for (NodeId v : g.neighbors(u)) {
      if (v > u) e << u << ' ' << v << '\n';
    }
    auto row = g.features().row(u);
    for (std::size_t k = 0; k < row.size(); ++k) f << (k ? " " : "") << detail::format_double(row[k]);
    f << '\n';
    l << g.label(u) << '\n';
    s << to_string(g.split(u)) << '\n';
  }
}

}  // namespace temcgl

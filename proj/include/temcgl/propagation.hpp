#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/binary_io.hpp"
#include "temcgl/graph.hpp"
#include "temcgl/rng.hpp"
#include "temcgl/sparse.hpp"

namespace temcgl {

enum class Variant : std::uint8_t { kS1 = 1, kS2 = 2, kS3 = 3, kReservoir = 4 };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::kS1: return "s1";
    case Variant::kS2: return "s2";
    case Variant::kS3: return "s3";
    case Variant::kReservoir: return "reservoir";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "s1") return Variant::kS1;
  if (s == "s2") return Variant::kS2;
  if (s == "s3") return Variant::kS3;
  if (s == "reservoir") return Variant::kReservoir;
  throw std::invalid_argument("unknown propagation strategy '" + s + "'");
}

struct ReservoirParams {
  std::size_t hidden_dim = 64;
  /// Half-width of the uniform weight distribution; 0 selects the scale that
  /// puts the recurrent matrix's spectral norm estimate at 0.9.
  double weight_scale = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const ReservoirParams&, const ReservoirParams&) = default;
};

/// How a node's ego-subnetwork is folded into its embedding.
struct PropagationStrategy {
  Variant variant = Variant::kS1;
  std::size_t hops = 2;
  std::optional<double> alpha;              // S2, S3
  std::optional<ReservoirParams> reservoir;  // Reservoir

  static PropagationStrategy s1(std::size_t hops) { return {Variant::kS1, hops, std::nullopt, std::nullopt}; }
  static PropagationStrategy s2(std::size_t hops, double alpha) { return {Variant::kS2, hops, alpha, std::nullopt}; }
  static PropagationStrategy s3(std::size_t hops, double alpha) { return {Variant::kS3, hops, alpha, std::nullopt}; }
  static PropagationStrategy reservoir_computing(std::size_t hops, ReservoirParams r) {
    return {Variant::kReservoir, hops, std::nullopt, r};
  }

  bool linear() const { return variant != Variant::kReservoir; }

  /// S1 uses self-loops; S2/S3 carry their own alpha*I term and the reservoir
  /// has a separate self weight.
  bool default_self_loops() const { return variant == Variant::kS1; }

  void validate() const {
    if (hops < 1) throw std::invalid_argument("propagation: hops must be >= 1");
    const bool wants_alpha = variant == Variant::kS2 || variant == Variant::kS3;
    if (wants_alpha != alpha.has_value()) {
      throw std::invalid_argument(std::string("propagation: alpha ") +
                                  (wants_alpha ? "required" : "not allowed") + " for " + to_string(variant));
    }
    if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) {
      throw std::invalid_argument("propagation: alpha must lie in [0, 1]");
    }
    if ((variant == Variant::kReservoir) != reservoir.has_value()) {
      throw std::invalid_argument("propagation: reservoir parameters present iff variant is reservoir");
    }
    if (reservoir && reservoir->hidden_dim == 0) {
      throw std::invalid_argument("propagation: reservoir hidden_dim must be >= 1");
    }
  }

  friend bool operator==(const PropagationStrategy&, const PropagationStrategy&) = default;
};

/// Per-node topology-aware embeddings; row v is node v's TE.
struct TEMatrix {
  Matrix values;
  PropagationStrategy strategy;
  bool self_loops = false;

  std::size_t num_nodes() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
  std::span<const double> row(NodeId v) const { return values.row(v); }
};

/// Fixed random weights of the reservoir encoder.
struct ReservoirWeights {
  Matrix input_self;       // hidden x in: self term on the first iteration
  Matrix input_neighbor;   // hidden x in: neighbor term on the first iteration
  Matrix self;             // hidden x hidden: self term afterwards
  Matrix neighbor;         // hidden x hidden: neighbor term afterwards
  double scale = 0.0;
};

/// Largest singular value estimate by power iteration on M^T M.
inline double spectral_norm_estimate(const Matrix& m, std::size_t iterations = 50) {
  std::vector<double> x(m.cols(), 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(m.cols(), 1))));
  std::vector<double> y(m.rows());
  double sigma = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
      y[r] = acc;
    }
    std::vector<double> z(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) z[c] += m(r, c) * y[r];
    }
    double norm = 0.0;
    for (double v : z) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    sigma = std::sqrt(norm);
    for (std::size_t c = 0; c < m.cols(); ++c) x[c] = z[c] / norm;
  }
  return sigma;
}

inline ReservoirWeights make_reservoir_weights(std::size_t input_dim, const ReservoirParams& p) {
  Rng rng = make_rng(p.seed, "reservoir.weights");
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto draw = [&](std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& x : m.values()) x = u(rng);
    return m;
  };
  ReservoirWeights w;
  w.input_self = draw(p.hidden_dim, input_dim);
  w.input_neighbor = draw(p.hidden_dim, input_dim);
  w.self = draw(p.hidden_dim, p.hidden_dim);
  w.neighbor = draw(p.hidden_dim, p.hidden_dim);
  if (p.weight_scale > 0.0) {
    w.scale = p.weight_scale;
  } else {
    const double sigma = spectral_norm_estimate(w.neighbor, 50);
    w.scale = sigma > 0.0 ? 0.9 / sigma : 1.0;
  }
  for (Matrix* m : {&w.input_self, &w.input_neighbor, &w.self, &w.neighbor}) {
    for (double& x : m->values()) x *= w.scale;
  }
  return w;
}

/// Parameter-free encoder turning (normalized adjacency, features) into TEs.
class TopologyEncoder {
 public:
  TopologyEncoder(PropagationStrategy strategy, std::size_t input_dim)
      : strategy_(std::move(strategy)), input_dim_(input_dim) {
    strategy_.validate();
    if (strategy_.variant == Variant::kReservoir) {
      weights_ = make_reservoir_weights(input_dim_, *strategy_.reservoir);
    }
  }

  const PropagationStrategy& strategy() const { return strategy_; }
  std::size_t output_dim() const {
    return strategy_.variant == Variant::kReservoir ? strategy_.reservoir->hidden_dim : input_dim_;
  }
  const std::optional<ReservoirWeights>& reservoir_weights() const { return weights_; }

  /// All rows at once: L sparse-dense products, the propagation matrix is never formed.
  TEMatrix encode(const NormalizedAdjacency& adj, const Matrix& x) const {
    check_inputs(adj.matrix, x);
    return TEMatrix{propagate(adj.matrix, x), strategy_, adj.self_loops_added};
  }

  /// Node v's TE computed from its ego-subnetwork alone: the operator rows and
  /// features of the nodes within `hops` of v. Matches row v of encode() bit
  /// for bit, because every row that feeds row v keeps its full neighborhood
  /// and its nonzero order.
  std::vector<double> encode_node(const NormalizedAdjacency& adj, const Matrix& x, NodeId v) const {
    check_inputs(adj.matrix, x);
    const CsrMatrix& a = adj.matrix;
    auto nodes = bfs_ball(a.row_ptr, a.col, v, strategy_.hops);
    std::vector<std::int64_t> local(a.n_rows, -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<std::int64_t>(i);

    CsrMatrix sub;
    sub.n_rows = sub.n_cols = nodes.size();
    sub.row_ptr.assign(nodes.size() + 1, 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodeId u = nodes[i];
      for (std::size_t j = a.row_ptr[u]; j < a.row_ptr[u + 1]; ++j) {
        if (local[a.col[j]] < 0) continue;
        sub.col.push_back(static_cast<NodeId>(local[a.col[j]]));
        sub.val.push_back(a.val[j]);
      }
      sub.row_ptr[i + 1] = sub.col.size();
    }
    Matrix out = propagate(sub, select_rows(x, nodes));
    auto r = out.row(static_cast<std::size_t>(local[v]));
    return {r.begin(), r.end()};
  }

 private:
  void check_inputs(const CsrMatrix& a, const Matrix& x) const {
    if (x.rows() != a.n_rows) {
      throw std::invalid_argument("compute_tes: feature rows (" + std::to_string(x.rows()) +
                                  ") != operator dimension (" + std::to_string(a.n_rows) + ")");
    }
    if (x.cols() != input_dim_) {
      throw std::invalid_argument("compute_tes: feature dim " + std::to_string(x.cols()) +
                                  " != encoder input dim " + std::to_string(input_dim_));
    }
    if (!x.all_finite()) throw std::invalid_argument("compute_tes: non-finite input features");
  }

  Matrix propagate(const CsrMatrix& a, const Matrix& x) const {
    const std::size_t hops = strategy_.hops;
    switch (strategy_.variant) {
      case Variant::kS1: {
        Matrix p = x;
        for (std::size_t l = 0; l < hops; ++l) p = spmm(a, p);
        return p;
      }
      case Variant::kS2: {
        // (1 - alpha) * mean_l(A^l X) + alpha * X
        const double alpha = *strategy_.alpha;
        Matrix p = x;
        Matrix acc(x.rows(), x.cols());
        for (std::size_t l = 0; l < hops; ++l) {
          p = spmm(a, p);
          auto& dst = acc.values();
          const auto& src = p.values();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        const double inv_l = 1.0 / static_cast<double>(hops);
        auto& out = acc.values();
        for (std::size_t i = 0; i < out.size(); ++i) {
          out[i] = (1.0 - alpha) * (out[i] * inv_l) + alpha * x.values()[i];
        }
        return acc;
      }
      case Variant::kS3: {
        const double alpha = *strategy_.alpha;
        Matrix p = x;
        for (std::size_t l = 0; l < hops; ++l) {
          Matrix ap = spmm(a, p);
          auto& dst = ap.values();
          const auto& prev = p.values();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0 - alpha) * dst[i] + alpha * prev[i];
          p = std::move(ap);
        }
        return p;
      }
      case Variant::kReservoir: {
        const ReservoirWeights& w = *weights_;
        Matrix h = x;
        for (std::size_t l = 0; l < hops; ++l) {
          const Matrix& ws = l == 0 ? w.input_self : w.self;
          const Matrix& wn = l == 0 ? w.input_neighbor : w.neighbor;
          Matrix agg = spmm(a, h);
          Matrix next(h.rows(), ws.rows());
          for (std::size_t v = 0; v < h.rows(); ++v) {
            auto hv = h.row(v);
            auto av = agg.row(v);
            for (std::size_t r = 0; r < ws.rows(); ++r) {
              double acc = 0.0;
              auto sr = ws.row(r);
              auto nr = wn.row(r);
              for (std::size_t c = 0; c < hv.size(); ++c) acc += sr[c] * hv[c] + nr[c] * av[c];
              next(v, r) = std::tanh(acc);
            }
          }
          h = std::move(next);
        }
        return h;
      }
    }
    throw std::logic_error("unreachable propagation variant");
  }

  PropagationStrategy strategy_;
  std::size_t input_dim_;
  std::optional<ReservoirWeights> weights_;
};

inline TEMatrix compute_tes(const NormalizedAdjacency& adj, const Matrix& features,
                            const PropagationStrategy& strategy) {
  return TopologyEncoder(strategy, features.cols()).encode(adj, features);
}

// TE export ------------------------------------------------------------------

inline constexpr char kTeMagic[4] = {'T', 'E', 'M', 'X'};
inline constexpr std::uint32_t kTeFormatVersion = 1;

/// Binary layout (little-endian): magic "TEMX", u32 version, u64 num_nodes,
/// u64 dim, strategy descriptor (u8 variant, u64 hops, f64 alpha, u64
/// reservoir hidden_dim, f64 reservoir weight_scale, u64 reservoir seed,
/// u8 self_loops), then num_nodes*dim f64 row-major.
inline void write_te_binary(const TEMatrix& tes, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.bytes(kTeMagic, 4);
  w.u32(kTeFormatVersion);
  w.u64(tes.num_nodes());
  w.u64(tes.dim());
  const auto& s = tes.strategy;
  w.u8(static_cast<std::uint8_t>(s.variant));
  w.u64(s.hops);
  w.f64(s.alpha.value_or(0.0));
  w.u64(s.reservoir ? s.reservoir->hidden_dim : 0);
  w.f64(s.reservoir ? s.reservoir->weight_scale : 0.0);
  w.u64(s.reservoir ? s.reservoir->seed : 0);
  w.u8(tes.self_loops ? 1 : 0);
  for (double x : tes.values.values()) w.f64(x);
  w.finish();
}

inline TEMatrix read_te_binary(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kTeMagic);
  if (r.u32() != kTeFormatVersion) throw std::runtime_error("TE file: unsupported version");
  const std::size_t n = r.u64();
  const std::size_t d = r.u64();
  TEMatrix tes;
  auto& s = tes.strategy;
  s.variant = static_cast<Variant>(r.u8());
  s.hops = r.u64();
  const double alpha = r.f64();
  const std::size_t hidden = r.u64();
  const double scale = r.f64();
  const std::uint64_t seed = r.u64();
  tes.self_loops = r.u8() != 0;
  if (s.variant == Variant::kS2 || s.variant == Variant::kS3) s.alpha = alpha;
  if (s.variant == Variant::kReservoir) s.reservoir = ReservoirParams{hidden, scale, seed};
  s.validate();
  std::vector<double> data(n * d);
  for (double& x : data) x = r.f64();
  r.expect_end();
  tes.values = Matrix(n, d, std::move(data));
  return tes;
}

inline void write_te_csv(const TEMatrix& tes, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << "node";
  for (std::size_t k = 0; k < tes.dim(); ++k) out << ",e" << k;
  out << '\n';
  char buf[32];
  for (NodeId v = 0; v < tes.num_nodes(); ++v) {
    out << v;
    for (double x : tes.row(v)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace temcgl

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "temcgl/binary_io.hpp"
#include "temcgl/coverage.hpp"
#include "temcgl/graph.hpp"
#include "temcgl/propagation.hpp"
#include "temcgl/rng.hpp"
#include "temcgl/task.hpp"

namespace temcgl {

/// A replayed sample: the stored TE plus its label and provenance.
struct MemoryEntry {
  std::vector<double> te;
  ClassId label = 0;
  TaskId task_id = 0;
  NodeId node_id = 0;

  friend bool operator==(const MemoryEntry&, const MemoryEntry&) = default;
};

enum class SamplerId : std::uint8_t { kUniform, kMeanOfFeature, kCoverageMax, kReservoirStream };

inline const char* to_string(SamplerId s) {
  switch (s) {
    case SamplerId::kUniform: return "uniform";
    case SamplerId::kMeanOfFeature: return "mof";
    case SamplerId::kCoverageMax: return "coverage_max";
    case SamplerId::kReservoirStream: return "reservoir_stream";
  }
  return "?";
}

inline SamplerId parse_sampler(const std::string& s) {
  if (s == "uniform") return SamplerId::kUniform;
  if (s == "mof") return SamplerId::kMeanOfFeature;
  if (s == "coverage_max") return SamplerId::kCoverageMax;
  if (s == "reservoir_stream") return SamplerId::kReservoirStream;
  throw std::invalid_argument("unknown sampler '" + s + "'");
}

struct PerTaskCount {
  std::size_t count = 0;
  friend bool operator==(const PerTaskCount&, const PerTaskCount&) = default;
};
struct PerTaskFraction {
  double fraction = 0.0;
  friend bool operator==(const PerTaskFraction&, const PerTaskFraction&) = default;
};
using BudgetPolicy = std::variant<PerTaskCount, PerTaskFraction>;

/// Number of entries stored for a task with `available` training nodes.
/// Fractions round up so any positive fraction stores at least one node.
inline std::size_t budget_for(const BudgetPolicy& policy, std::size_t available) {
  if (const auto* c = std::get_if<PerTaskCount>(&policy)) return std::min(c->count, available);
  const double f = std::get<PerTaskFraction>(policy).fraction;
  if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("budget fraction must lie in [0, 1]");
  const double raw = f * static_cast<double>(available);
  const auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(n, available);
}

// Samplers ---------------------------------------------------------------------

/// Uniform sampling without replacement (partial Fisher-Yates).
inline std::vector<NodeId> sample_uniform(std::span<const NodeId> candidates, std::size_t n, Rng& rng) {
  if (n > candidates.size()) {
    throw std::invalid_argument("sample_uniform: budget " + std::to_string(n) + " exceeds " +
                                std::to_string(candidates.size()) + " candidates");
  }
  std::vector<NodeId> pool(candidates.begin(), candidates.end());
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

/// Mean-of-feature selection over TEs. Each class ranks its members by
/// Euclidean distance to the class-mean TE (ties by node id); classes then
/// contribute round-robin in ascending class order until n are chosen.
inline std::vector<NodeId> sample_mof(std::span<const NodeId> candidates, const TEMatrix& tes,
                                      std::span<const ClassId> labels, std::size_t n) {
  if (n > candidates.size()) {
    throw std::invalid_argument("sample_mof: budget " + std::to_string(n) + " exceeds " +
                                std::to_string(candidates.size()) + " candidates");
  }
  std::map<ClassId, std::vector<NodeId>> by_class;
  for (NodeId v : candidates) by_class[labels[v]].push_back(v);

  const std::size_t d = tes.dim();
  std::vector<std::vector<NodeId>> ranked;
  for (auto& [cls, members] : by_class) {
    std::sort(members.begin(), members.end());
    std::vector<double> mean(d, 0.0);
    for (NodeId v : members) {
      auto r = tes.row(v);
      for (std::size_t k = 0; k < d; ++k) mean[k] += r[k];
    }
    for (double& m : mean) m /= static_cast<double>(members.size());
    std::vector<std::pair<double, NodeId>> dist;
    dist.reserve(members.size());
    for (NodeId v : members) {
      auto r = tes.row(v);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (r[k] - mean[k]) * (r[k] - mean[k]);
      dist.emplace_back(std::sqrt(s), v);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<NodeId> order;
    order.reserve(dist.size());
    for (auto& [dd, v] : dist) order.push_back(v);
    ranked.push_back(std::move(order));
  }

  std::vector<NodeId> out;
  out.reserve(n);
  for (std::size_t rank = 0; out.size() < n; ++rank) {
    for (const auto& order : ranked) {
      if (out.size() == n) break;
      if (rank < order.size()) out.push_back(order[rank]);
    }
  }
  return out;
}

/// Streaming reservoir (Algorithm R) for a task whose nodes arrive in batches.
/// After any prefix of the stream it holds a uniform without-replacement
/// sample of min(capacity, seen) entries.
class ReservoirStream {
 public:
  explicit ReservoirStream(std::size_t capacity) : capacity_(capacity) {}

  void offer(std::span<const MemoryEntry> batch, Rng& rng) {
    for (const MemoryEntry& e : batch) {
      if (sample_.size() < capacity_) {
        sample_.push_back(e);
      } else if (capacity_ > 0) {
        std::uniform_int_distribution<std::size_t> pick(0, seen_);
        const std::size_t j = pick(rng);
        if (j < capacity_) sample_[j] = e;
      }
      ++seen_;
    }
  }

  std::size_t seen() const { return seen_; }
  const std::vector<MemoryEntry>& sample() const { return sample_; }
  std::vector<MemoryEntry> finalize() && { return std::move(sample_); }

 private:
  std::size_t capacity_;
  std::size_t seen_ = 0;
  std::vector<MemoryEntry> sample_;
};

// Buffer -------------------------------------------------------------------------

/// Per-entry bytes beyond the TE payload: task id (u32), node id (u64), label (u32).
inline constexpr std::size_t kEntryOverheadBytes = 16;

/// Topology-aware embedding memory. Entries from finished tasks are never
/// touched again; each task contributes its sample exactly once.
class MemoryBuffer {
 public:
  MemoryBuffer(BudgetPolicy policy, SamplerId sampler) : policy_(policy), sampler_(sampler) {}

  const std::vector<MemoryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const BudgetPolicy& policy() const { return policy_; }
  SamplerId sampler() const { return sampler_; }
  bool has_task(TaskId t) const { return tasks_.contains(t); }

  std::size_t dim() const { return entries_.empty() ? 0 : entries_.front().te.size(); }

  /// Bytes held by the stored entries.
  std::size_t footprint_bytes() const {
    std::size_t bytes = 0;
    for (const auto& e : entries_) bytes += e.te.size() * sizeof(double) + kEntryOverheadBytes;
    return bytes;
  }

  void append_task(TaskId t, std::vector<MemoryEntry> batch) {
    if (has_task(t)) throw std::logic_error("memory buffer already updated for task " + std::to_string(t));
    for (auto& e : batch) {
      if (e.task_id != t) throw std::invalid_argument("append_task: entry carries a different task id");
      if (!entries_.empty() && e.te.size() != dim()) throw std::invalid_argument("append_task: TE dim mismatch");
      for (double x : e.te) {
        if (!std::isfinite(x)) throw std::invalid_argument("append_task: non-finite TE");
      }
      entries_.push_back(std::move(e));
    }
    tasks_.insert(t);
  }

  friend bool operator==(const MemoryBuffer& a, const MemoryBuffer& b) {
    return a.entries_ == b.entries_ && a.tasks_ == b.tasks_;
  }

 private:
  BudgetPolicy policy_;
  SamplerId sampler_;
  std::vector<MemoryEntry> entries_;
  std::set<TaskId> tasks_;
};

inline MemoryEntry make_entry(const TEMatrix& tes, const Graph& g, NodeId v, TaskId t) {
  auto r = tes.row(v);
  return MemoryEntry{{r.begin(), r.end()}, g.label(v), t, v};
}

/// Selects the task's nodes with the buffer's sampler (no buffer state involved).
inline std::vector<NodeId> select_for_task(SamplerId sampler, const Graph& g, const TEMatrix& tes,
                                           std::span<const NodeId> candidates, std::size_t n, Rng& rng) {
  switch (sampler) {
    case SamplerId::kUniform: return sample_uniform(candidates, n, rng);
    case SamplerId::kMeanOfFeature: return sample_mof(candidates, tes, g.labels(), n);
    case SamplerId::kCoverageMax: return coverage_max_sample(g, candidates, tes.strategy.hops, n, rng);
    case SamplerId::kReservoirStream: {
      // Nodes arrive in id order in batches of 64.
      ReservoirStream stream(n);
      constexpr std::size_t kBatch = 64;
      for (std::size_t i = 0; i < candidates.size(); i += kBatch) {
        std::vector<MemoryEntry> batch;
        for (std::size_t j = i; j < std::min(candidates.size(), i + kBatch); ++j) {
          batch.push_back(MemoryEntry{{}, 0, 0, candidates[j]});
        }
        stream.offer(batch, rng);
      }
      std::vector<NodeId> out;
      for (const auto& e : std::move(stream).finalize()) out.push_back(e.node_id);
      return out;
    }
  }
  throw std::logic_error("unreachable sampler");
}

/// TEM <- TEM u sampler({e_v | v in task train nodes}, n).
/// `g` must be the graph the TEs were computed on.
inline std::vector<NodeId> update_tem(MemoryBuffer& buf, const Graph& g, const TEMatrix& tes,
                                      const TaskSpec& task, Rng& rng) {
  if (buf.has_task(task.task_id)) {
    throw std::logic_error("update_tem: task " + std::to_string(task.task_id) + " already stored");
  }
  if (tes.num_nodes() != g.num_nodes()) throw std::invalid_argument("update_tem: TE rows != graph nodes");
  const std::size_t n = budget_for(buf.policy(), task.train.size());
  auto chosen = select_for_task(buf.sampler(), g, tes, task.train, n, rng);
  std::vector<MemoryEntry> batch;
  batch.reserve(chosen.size());
  for (NodeId v : chosen) batch.push_back(make_entry(tes, g, v, task.task_id));
  buf.append_task(task.task_id, std::move(batch));
  return chosen;
}

/// Bytes needed to store the same nodes as raw ego-subnetworks (features of
/// every covered node plus the subnetwork's edges as u32 pairs); the quantity
/// TE storage avoids.
inline std::size_t ego_subnetwork_storage_bytes(const Graph& g, std::span<const NodeId> nodes, std::size_t hops) {
  std::size_t bytes = 0;
  for (NodeId v : nodes) {
    auto ball = l_hop_neighborhood(g, v, hops);
    std::size_t edges = 0;
    for (NodeId u : ball) {
      for (NodeId w : g.neighbors(u)) {
        if (w > u && std::binary_search(ball.begin(), ball.end(), w)) ++edges;
      }
    }
    bytes += ball.size() * (g.feature_dim() * sizeof(double) + sizeof(std::uint32_t)) + edges * 2 * sizeof(std::uint32_t);
  }
  return bytes;
}

// Checkpoint ---------------------------------------------------------------------

inline constexpr char kBufferMagic[4] = {'T', 'E', 'M', 'B'};
inline constexpr std::uint32_t kBufferFormatVersion = 1;

/// Layout (little-endian): magic "TEMB", u32 version, u64 dim, u64 count,
/// u8 sampler, u8 budget kind (0 count, 1 fraction), u64 count / f64 fraction,
/// then per entry u32 task_id, u64 node_id, u32 label, dim x f64.
inline void save_buffer(const MemoryBuffer& buf, const std::filesystem::path& path) {
  BinaryWriter w(path);
  w.bytes(kBufferMagic, 4);
  w.u32(kBufferFormatVersion);
  w.u64(buf.dim());
  w.u64(buf.size());
  w.u8(static_cast<std::uint8_t>(buf.sampler()));
  if (const auto* c = std::get_if<PerTaskCount>(&buf.policy())) {
    w.u8(0);
    w.u64(c->count);
  } else {
    w.u8(1);
    w.f64(std::get<PerTaskFraction>(buf.policy()).fraction);
  }
  for (const auto& e : buf.entries()) {
    w.u32(e.task_id);
    w.u64(e.node_id);
    w.u32(e.label);
    for (double x : e.te) w.f64(x);
  }
  w.finish();
}

inline MemoryBuffer load_buffer(const std::filesystem::path& path) {
  BinaryReader r(path);
  r.expect_magic(kBufferMagic);
  if (r.u32() != kBufferFormatVersion) throw std::runtime_error("buffer checkpoint: unsupported version");
  const std::size_t dim = r.u64();
  const std::size_t count = r.u64();
  const auto sampler = static_cast<SamplerId>(r.u8());
  BudgetPolicy policy = PerTaskCount{};
  if (r.u8() == 0) {
    policy = PerTaskCount{r.u64()};
  } else {
    policy = PerTaskFraction{r.f64()};
  }
  std::map<TaskId, std::vector<MemoryEntry>> by_task;
  std::vector<TaskId> order;
  for (std::size_t i = 0; i < count; ++i) {
    MemoryEntry e;
    e.task_id = r.u32();
    e.node_id = static_cast<NodeId>(r.u64());
    e.label = r.u32();
    e.te.resize(dim);
    for (double& x : e.te) x = r.f64();
    if (!by_task.contains(e.task_id)) order.push_back(e.task_id);
    by_task[e.task_id].push_back(std::move(e));
  }
  r.expect_end();
  MemoryBuffer buf(policy, sampler);
  for (TaskId t : order) buf.append_task(t, std::move(by_task[t]));
  return buf;
}

}  // namespace temcgl

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/harness.hpp"
#include "temcgl/rng.hpp"

namespace temcgl {

inline constexpr const char* kVersion = "0.1.0";

/// 16 hex digits identifying a serialized configuration.
inline std::string manifest_hash(const std::string& serialized_config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialized_config)));
  return buf;
}

/// Six significant digits, the precision of every numeric CSV field.
inline std::string format_g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path, const std::string& hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "# manifest=" << hash << "\n";
  return out;
}

inline void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace detail

inline void write_manifest(const std::filesystem::path& path, const std::string& hash, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "config_hash=" << hash << "\nseed=" << seed << "\nversion=" << kVersion << "\n";
}

/// Row per task; entries above the diagonal are NA.
inline void write_accuracy_csv(const std::filesystem::path& path, const AccuracyMatrix& m, const std::string& hash) {
  auto out = detail::open_csv(path, hash);
  out << "task_index";
  for (std::size_t j = 0; j < m.num_tasks(); ++j) out << ",task_" << j;
  out << "\n";
  for (std::size_t i = 0; i < m.num_tasks(); ++i) {
    out << i;
    for (std::size_t j = 0; j < m.num_tasks(); ++j) out << "," << (m.defined(i, j) ? format_g6(m.at(i, j)) : "NA");
    out << "\n";
  }
  detail::close_csv(out, path);
}

/// AF is left empty for the first task, where it is undefined.
inline void write_curves_csv(const std::filesystem::path& path, const RunResult& r, const std::string& hash) {
  auto out = detail::open_csv(path, hash);
  out << "task_index,aa,af\n";
  for (std::size_t i = 0; i < r.average_accuracy.size(); ++i) {
    out << i << "," << format_g6(r.average_accuracy[i]) << ",";
    if (r.average_forgetting[i]) out << format_g6(*r.average_forgetting[i]);
    out << "\n";
  }
  detail::close_csv(out, path);
}

inline void write_buffer_stats_csv(const std::filesystem::path& path, std::span<const BufferStat> stats,
                                   const std::string& hash) {
  auto out = detail::open_csv(path, hash);
  out << "task_index,entries,bytes,coverage_ratio\n";
  for (const auto& s : stats) {
    out << s.task_index << "," << s.entries << "," << s.bytes << "," << format_g6(s.coverage_ratio) << "\n";
  }
  detail::close_csv(out, path);
}

inline void write_study_table(const std::filesystem::path& path, std::span<const StudyCell> cells,
                              const std::string& hash) {
  auto out = detail::open_csv(path, hash);
  out << "sampler,budget,mean_aa,std_aa,mean_coverage,std_coverage\n";
  for (const auto& c : cells) {
    out << to_string(c.sampler) << "," << format_g6(c.budget) << "," << format_g6(mean_of(c.aa)) << ","
        << format_g6(stddev_of(c.aa)) << "," << format_g6(mean_of(c.coverage)) << ","
        << format_g6(stddev_of(c.coverage)) << "\n";
  }
  detail::close_csv(out, path);
}

/// One row per node: id, label, then the vector. Values use full precision so
/// downstream tools see exactly what the model computed.
inline void write_embeddings_csv(const std::filesystem::path& path, std::span<const NodeId> nodes,
                                 std::span<const ClassId> labels, const Matrix& vectors, const std::string& hash) {
  if (nodes.size() != vectors.rows() || labels.size() != vectors.rows()) {
    throw std::invalid_argument("write_embeddings_csv: row count mismatch");
  }
  auto out = detail::open_csv(path, hash);
  out << "node,label";
  for (std::size_t c = 0; c < vectors.cols(); ++c) out << ",h" << c;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    out << nodes[i] << "," << labels[i];
    for (double x : vectors.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", x);
      out << "," << buf;
    }
    out << "\n";
  }
  detail::close_csv(out, path);
}

}  // namespace temcgl

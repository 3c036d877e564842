#pragma once

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "temcgl/config.hpp"
#include "temcgl/report.hpp"
#include "temcgl/theorem.hpp"

namespace temcgl::cli {

namespace fs = std::filesystem;

struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::size_t jobs = 1;
};

/// Logger writing to stderr; level from TEMCGL_LOG (any spdlog level name).
inline std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::stderr_color_mt("temcgl");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("TEMCGL_LOG");
    auto level = env ? spdlog::level::from_str(env) : spdlog::level::info;
    if (level == spdlog::level::off && std::string_view(env) != "off") level = spdlog::level::info;
    l->set_level(level);
    return l;
  }();
  return log;
}

/// Loads the config and applies command-line overrides.
inline ExperimentConfig resolve_config(const CommonOptions& o) {
  if (!o.config) throw ConfigError("--config is required");
  ExperimentConfig c = load_config(*o.config);
  if (o.seed) c.run.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  return c;
}

/// Manifest hash of everything that shapes the results; the output
/// directory is left out so relocated reruns share a manifest.
inline std::string config_hash(ExperimentConfig c) {
  c.output_dir.clear();
  return manifest_hash(serialize_config(c));
}

inline fs::path model_checkpoint(const fs::path& dir, std::size_t task) {
  return dir / ("model_task" + std::to_string(task) + ".bin");
}

template <typename F>
int guarded(const char* name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    logger()->error("{}: {}", name, e.what());
    return 1;
  }
}

inline int cmd_run(const CommonOptions& o) {
  return guarded("run", [&] {
    const ExperimentConfig c = resolve_config(o);
    const std::string serialized = serialize_config(c);
    const std::string hash = config_hash(c);
    const Graph g = load_dataset(c.dataset, c.run.seed);
    logger()->info("run: {} nodes, {} edges, {} classes, seed {}", g.num_nodes(), g.num_edges(), g.num_classes(),
                   c.run.seed);

    const RunResult r = run_continual(g, c.run);
    for (std::size_t i = 0; i < r.average_accuracy.size(); ++i) {
      logger()->debug("task {}: AA {:.4f}", i, r.average_accuracy[i]);
    }

    fs::create_directories(c.output_dir);
    write_manifest(c.output_dir / "manifest.txt", hash, c.run.seed);
    {
      std::ofstream cfg(c.output_dir / "config.ini", std::ios::binary);
      cfg << serialized;
    }
    write_accuracy_csv(c.output_dir / "accuracy_matrix.csv", r.accuracy, hash);
    write_curves_csv(c.output_dir / "curves.csv", r, hash);
    write_buffer_stats_csv(c.output_dir / "buffer_stats.csv", r.buffer_stats, hash);
    for (std::size_t i = 0; i < r.models.size(); ++i) save_model(r.models[i], model_checkpoint(c.output_dir, i));
    save_buffer(r.buffer, c.output_dir / "buffer.bin");
    logger()->info("run: final AA {:.4f}, outputs in {}", r.final_aa(), c.output_dir.string());
    return 0;
  });
}

inline int cmd_sample_study(const CommonOptions& o) {
  return guarded("sample-study", [&] {
    const ExperimentConfig c = resolve_config(o);
    const std::string hash = config_hash(c);
    if (c.study.samplers.empty() || c.study.budgets.empty() || c.study.seeds == 0) {
      throw ConfigError("[study] needs at least one sampler, one budget and one seed");
    }
    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < c.study.seeds; ++i) seeds.push_back(c.run.seed + i);
    logger()->info("sample-study: {} samplers x {} budgets x {} seeds, {} jobs", c.study.samplers.size(),
                   c.study.budgets.size(), seeds.size(), o.jobs);
    const auto cells = run_sample_study([&](std::uint64_t s) { return load_dataset(c.dataset, s); }, c.run,
                                        c.study.samplers, c.study.budgets, seeds, o.jobs);
    fs::create_directories(c.output_dir);
    write_manifest(c.output_dir / "manifest.txt", hash, c.run.seed);
    write_study_table(c.output_dir / "table.csv", cells, hash);
    return 0;
  });
}

/// `corrupt` perturbs one re-weighting coefficient per instance; it exists to
/// show that the check can fail.
inline int cmd_check_theorem(std::uint64_t seed, std::size_t trials, double corrupt = 0.0) {
  return guarded("check-theorem", [&] {
    constexpr double kTolerance = 1e-8;
    const TheoremReport rep = run_theorem_trials(seed, trials, PseudoGradientOptions{corrupt});
    std::printf("trials=%zu max_deviation=%.3e tolerance=%.0e\n", trials, rep.max_deviation, kTolerance);
    if (!rep.passed(kTolerance)) {
      logger()->error("check-theorem: deviation {:.3e} exceeds {:.0e}", rep.max_deviation, kTolerance);
      return 1;
    }
    return 0;
  });
}

enum class ExportLayer { kHidden, kTe };

/// Writes embeddings_task<i>.csv for every node visible at task i, using the
/// checkpoint written by `run` into the configured output directory.
inline int cmd_export_embeddings(const CommonOptions& o, std::size_t task, ExportLayer layer = ExportLayer::kHidden) {
  return guarded("export-embeddings", [&] {
    const ExperimentConfig c = resolve_config(o);
    const std::string hash = config_hash(c);
    const fs::path ckpt = model_checkpoint(c.output_dir, task);
    if (!fs::exists(ckpt)) throw std::runtime_error("missing checkpoint '" + ckpt.string() + "'; run `run` first");
    const MlpParams params = load_model(ckpt);

    const Graph g = load_dataset(c.dataset, c.run.seed);
    const auto tasks = build_task_sequence(g, c.run.classes_per_task);
    if (task >= tasks.size()) throw std::out_of_range("task index " + std::to_string(task) + " out of range");
    const TEMatrix tes = task_embeddings(g, tasks, task, c.run);
    if (params.input_dim() != tes.dim()) throw std::runtime_error("checkpoint does not match the configured encoder");

    std::vector<ClassId> seen;
    for (std::size_t j = 0; j <= task; ++j) seen.insert(seen.end(), tasks[j].classes.begin(), tasks[j].classes.end());
    std::vector<NodeId> nodes;
    std::vector<ClassId> labels;
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
      if (std::find(seen.begin(), seen.end(), g.label(v)) != seen.end()) {
        nodes.push_back(v);
        labels.push_back(g.label(v));
      }
    }
    const Matrix rows = select_rows(tes.values, nodes);
    const Matrix vectors = layer == ExportLayer::kTe ? rows : hidden_representation(params, rows);
    const fs::path path = c.output_dir / ("embeddings_task" + std::to_string(task) + ".csv");
    write_embeddings_csv(path, nodes, labels, vectors, hash);
    logger()->info("export-embeddings: {} rows x {} dims to {}", nodes.size(), vectors.cols(), path.string());
    return 0;
  });
}

/// Writes the configured SBM as edges.txt, features.txt, labels.txt, splits.txt.
inline int cmd_gen_sbm(const CommonOptions& o) {
  return guarded("gen-sbm", [&] {
    const ExperimentConfig c = resolve_config(o);
    if (c.dataset.kind != DatasetKind::kSbm) throw ConfigError("gen-sbm needs [dataset] kind = sbm");
    const Graph g = load_dataset(c.dataset, c.run.seed);
    fs::create_directories(c.output_dir);
    const GraphFiles files{c.output_dir / "edges.txt", c.output_dir / "features.txt", c.output_dir / "labels.txt",
                           c.output_dir / "splits.txt"};
    save_graph(g, files);
    logger()->info("gen-sbm: {} nodes, {} edges, homophily {:.3f}", g.num_nodes(), g.num_edges(),
                   g.num_edges() ? homophily_ratio(g) : 0.0);
    return 0;
  });
}

}  // namespace temcgl::cli

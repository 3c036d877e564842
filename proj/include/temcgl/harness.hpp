#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "temcgl/coverage.hpp"
#include "temcgl/graph.hpp"
#include "temcgl/memory.hpp"
#include "temcgl/mlp.hpp"
#include "temcgl/propagation.hpp"
#include "temcgl/rng.hpp"
#include "temcgl/task.hpp"

namespace temcgl {

enum class Scenario : std::uint8_t { kClassIL, kTaskIL };
enum class Regime : std::uint8_t { kTem, kFinetune, kJoint };
enum class InterTaskEdges : std::uint8_t { kKeepSeen, kDropAll };
enum class SelfLoops : std::uint8_t { kAuto, kOn, kOff };

inline const char* to_string(Scenario s) { return s == Scenario::kClassIL ? "class_il" : "task_il"; }
inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::kTem: return "tem";
    case Regime::kFinetune: return "finetune";
    case Regime::kJoint: return "joint";
  }
  return "?";
}
inline const char* to_string(InterTaskEdges e) { return e == InterTaskEdges::kKeepSeen ? "keep_seen" : "drop_all"; }
inline const char* to_string(SelfLoops s) {
  switch (s) {
    case SelfLoops::kAuto: return "auto";
    case SelfLoops::kOn: return "on";
    case SelfLoops::kOff: return "off";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "class_il") return Scenario::kClassIL;
  if (s == "task_il") return Scenario::kTaskIL;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}
inline Regime parse_regime(const std::string& s) {
  if (s == "tem") return Regime::kTem;
  if (s == "finetune") return Regime::kFinetune;
  if (s == "joint") return Regime::kJoint;
  throw std::invalid_argument("unknown regime '" + s + "'");
}
inline InterTaskEdges parse_inter_task_edges(const std::string& s) {
  if (s == "keep_seen") return InterTaskEdges::kKeepSeen;
  if (s == "drop_all") return InterTaskEdges::kDropAll;
  throw std::invalid_argument("unknown inter_task_edges '" + s + "'");
}
inline SelfLoops parse_self_loops(const std::string& s) {
  if (s == "auto") return SelfLoops::kAuto;
  if (s == "on") return SelfLoops::kOn;
  if (s == "off") return SelfLoops::kOff;
  throw std::invalid_argument("unknown self_loops '" + s + "'");
}

struct RunConfig {
  PropagationStrategy strategy = PropagationStrategy::s1(2);
  SelfLoops self_loops = SelfLoops::kAuto;
  SamplerId sampler = SamplerId::kCoverageMax;
  BudgetPolicy budget = PerTaskFraction{0.1};
  LossConfig loss;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 0.01;
  std::vector<std::size_t> hidden = {256};
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t classes_per_task = 2;
  Scenario scenario = Scenario::kClassIL;
  Regime regime = Regime::kTem;
  InterTaskEdges inter_task_edges = InterTaskEdges::kKeepSeen;
  std::uint64_t seed = 0;

  bool use_self_loops() const {
    return self_loops == SelfLoops::kAuto ? strategy.default_self_loops() : self_loops == SelfLoops::kOn;
  }

  void validate() const {
    strategy.validate();
    if (epochs == 0) throw std::invalid_argument("RunConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("RunConfig: learning_rate must be > 0");
    if (!(loss.lambda >= 0.0) || !std::isfinite(loss.lambda)) throw std::invalid_argument("RunConfig: lambda must be finite and >= 0");
    if (classes_per_task == 0) throw std::invalid_argument("RunConfig: classes_per_task must be >= 1");
    for (std::size_t h : hidden) {
      if (h == 0) throw std::invalid_argument("RunConfig: hidden widths must be >= 1");
    }
    if (const auto* f = std::get_if<PerTaskFraction>(&budget); f && !(f->fraction >= 0.0 && f->fraction <= 1.0)) {
      throw std::invalid_argument("RunConfig: budget fraction must lie in [0, 1]");
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Lower-triangular T x T matrix; entry (i, j) is accuracy on task j after task i.
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t tasks = 0)
      : tasks_(tasks), values_(tasks * tasks, std::numeric_limits<double>::quiet_NaN()) {}

  std::size_t num_tasks() const { return tasks_; }
  bool defined(std::size_t i, std::size_t j) const { return j <= i && !std::isnan(values_[i * tasks_ + j]); }
  double at(std::size_t i, std::size_t j) const {
    if (!defined(i, j)) throw std::out_of_range("AccuracyMatrix: entry undefined");
    return values_[i * tasks_ + j];
  }
  void set(std::size_t i, std::size_t j, double acc) {
    if (j > i || i >= tasks_) throw std::out_of_range("AccuracyMatrix: only j <= i < T may be set");
    if (!(acc >= 0.0 && acc <= 1.0)) throw std::invalid_argument("AccuracyMatrix: accuracy outside [0, 1]");
    values_[i * tasks_ + j] = acc;
  }

 private:
  std::size_t tasks_;
  std::vector<double> values_;
};

/// Mean of row i over tasks 0..i (0-based task index).
inline double average_accuracy(const AccuracyMatrix& m, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j <= i; ++j) s += m.at(i, j);
  return s / static_cast<double>(i + 1);
}

/// Mean over j < i of M[i][j] - M[j][j]; empty for the first task.
inline std::optional<double> average_forgetting(const AccuracyMatrix& m, std::size_t i) {
  if (i == 0) return std::nullopt;
  double s = 0.0;
  for (std::size_t j = 0; j < i; ++j) s += m.at(i, j) - m.at(j, j);
  return s / static_cast<double>(i);
}

namespace detail {

inline std::size_t masked_argmax(std::span<const double> logits, std::span<const ClassId> allowed) {
  std::size_t best = allowed.front();
  for (ClassId c : allowed) {
    if (logits[c] > logits[best]) best = c;
  }
  return best;
}

}  // namespace detail

/// Accuracy on `nodes` with predictions restricted to `allowed` classes.
inline double masked_accuracy(const MlpParams& params, const TEMatrix& tes, const Graph& g,
                              std::span<const NodeId> nodes, std::span<const ClassId> allowed) {
  if (nodes.empty()) return 0.0;
  const Matrix logits = forward(params, select_rows(tes.values, nodes));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (detail::masked_argmax(logits.row(i), allowed) == g.label(nodes[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(nodes.size());
}

/// Test accuracy on each learned task. Class-IL picks among every class seen so
/// far; task-IL only among the evaluated task's classes.
inline std::vector<double> evaluate(const MlpParams& params, const TEMatrix& tes, const Graph& g,
                                    std::span<const TaskSpec> learned, Scenario scenario) {
  std::vector<ClassId> seen;
  for (const auto& t : learned) seen.insert(seen.end(), t.classes.begin(), t.classes.end());
  std::vector<double> acc;
  acc.reserve(learned.size());
  for (const auto& t : learned) {
    acc.push_back(masked_accuracy(params, tes, g, t.test, scenario == Scenario::kClassIL ? seen : t.classes));
  }
  return acc;
}

/// The network as visible at task `tau`: nodes of unseen classes lose every
/// edge; with kDropAll, edges crossing tasks are removed as well.
inline Graph visible_graph(const Graph& g, std::span<const TaskSpec> tasks, std::size_t tau, InterTaskEdges mode) {
  std::vector<std::int64_t> task_of_class(g.num_classes(), -1);
  for (const auto& t : tasks) {
    for (ClassId c : t.classes) task_of_class[c] = t.task_id;
  }
  const auto limit = static_cast<std::int64_t>(tau);
  return g.filter_edges([&](NodeId u, NodeId v) {
    const auto tu = task_of_class[g.label(u)];
    const auto tv = task_of_class[g.label(v)];
    if (tu > limit || tv > limit) return false;
    return mode == InterTaskEdges::kKeepSeen || tu == tv;
  });
}

/// Builds the replay loss batch: current-task items followed by buffer items.
/// Class-balance weights are computed jointly; buffer items are then scaled by
/// lambda (and dropped when lambda is zero).
inline WeightedBatch make_replay_batch(const TEMatrix& tes, const Graph& g, std::span<const NodeId> current,
                                       std::span<const MemoryEntry> replay, const LossConfig& cfg) {
  const bool use_replay = cfg.lambda > 0.0 && !replay.empty();
  const std::size_t n = current.size() + (use_replay ? replay.size() : 0);
  WeightedBatch b{Matrix(n, tes.dim()), {}, {}};
  b.labels.reserve(n);
  for (std::size_t i = 0; i < current.size(); ++i) {
    auto r = tes.row(current[i]);
    std::copy(r.begin(), r.end(), b.inputs.row(i).begin());
    b.labels.push_back(g.label(current[i]));
  }
  if (use_replay) {
    for (std::size_t i = 0; i < replay.size(); ++i) {
      if (replay[i].te.size() != tes.dim()) throw std::invalid_argument("replay entry dim != TE dim");
      std::copy(replay[i].te.begin(), replay[i].te.end(), b.inputs.row(current.size() + i).begin());
      b.labels.push_back(replay[i].label);
    }
  }
  b.weights = cfg.class_balance ? class_balance_weights(b.labels) : std::vector<double>(n, 1.0);
  for (std::size_t i = current.size(); i < n; ++i) b.weights[i] *= cfg.lambda;
  return b;
}

struct TrainOutcome {
  std::size_t epochs_run = 0;
  double final_loss = 0.0;
  double best_valid_accuracy = 0.0;
};

/// Full-batch training with early stopping on validation accuracy. An epoch
/// counts as an improvement when validation accuracy rises, or holds while the
/// training loss falls; the best parameters are restored at the end.
inline TrainOutcome train_head(MlpParams& params, const WeightedBatch& batch, const RunConfig& cfg,
                               const std::function<double(const MlpParams&)>& valid_accuracy) {
  TrainOutcome out;
  if (batch.size() == 0) return out;
  OptimizerState opt = OptimizerState::make(cfg.optimizer, cfg.learning_rate, params);
  MlpParams best = params;
  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto lg = loss_and_grad(params, batch);
    optimizer_step(opt, params, lg.grad);
    ++out.epochs_run;
    out.final_loss = lg.loss;
    const double acc = valid_accuracy(params);
    if (acc > best_acc || (acc == best_acc && lg.loss < best_loss)) {
      best_acc = acc;
      best_loss = lg.loss;
      best = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience && cfg.patience > 0) {
      break;
    }
  }
  params = std::move(best);
  out.best_valid_accuracy = best_acc;
  return out;
}

struct BufferStat {
  std::size_t task_index = 0;
  std::size_t entries = 0;
  std::size_t bytes = 0;
  double coverage_ratio = 0.0;
};

struct RunResult {
  std::vector<TaskSpec> tasks;
  AccuracyMatrix accuracy;
  std::vector<double> average_accuracy;
  std::vector<std::optional<double>> average_forgetting;
  std::vector<BufferStat> buffer_stats;
  /// Head parameters after each task.
  std::vector<MlpParams> models;
  MemoryBuffer buffer{PerTaskCount{0}, SamplerId::kUniform};

  double final_aa() const { return average_accuracy.back(); }
  std::optional<double> final_af() const { return average_forgetting.back(); }
  double mean_coverage() const {
    if (buffer_stats.empty()) return 0.0;
    double s = 0.0;
    for (const auto& b : buffer_stats) s += b.coverage_ratio;
    return s / static_cast<double>(buffer_stats.size());
  }
};

/// TEs of the network visible at task `tau` (one row per node of `g`).
inline TEMatrix task_embeddings(const Graph& g, std::span<const TaskSpec> tasks, std::size_t tau,
                                const RunConfig& cfg, Graph* visible_out = nullptr) {
  Graph visible = visible_graph(g, tasks, tau, cfg.inter_task_edges);
  auto adj = normalize_adjacency(visible, cfg.use_self_loops());
  TEMatrix tes = compute_tes(adj, g.features(), cfg.strategy);
  if (visible_out) *visible_out = std::move(visible);
  return tes;
}

/// Trains over the class-incremental task sequence and fills the accuracy matrix.
inline RunResult run_continual(const Graph& g, const RunConfig& cfg) {
  cfg.validate();
  RunResult res;
  res.tasks = build_task_sequence(g, cfg.classes_per_task);
  const std::size_t num_tasks = res.tasks.size();
  res.accuracy = AccuracyMatrix(num_tasks);
  res.buffer = MemoryBuffer(cfg.budget, cfg.sampler);

  const TopologyEncoder encoder(cfg.strategy, g.feature_dim());
  const std::size_t te_dim = encoder.output_dim();
  MlpParams params = init_mlp(te_dim, cfg.hidden, g.num_classes(), derive_seed(cfg.seed, "mlp", 0));

  std::vector<ClassId> seen;
  for (std::size_t tau = 0; tau < num_tasks; ++tau) {
    const TaskSpec& task = res.tasks[tau];
    seen.insert(seen.end(), task.classes.begin(), task.classes.end());
    Graph visible;
    const TEMatrix tes = task_embeddings(g, res.tasks, tau, cfg, &visible);

    std::vector<NodeId> current;
    std::span<const MemoryEntry> replay;
    switch (cfg.regime) {
      case Regime::kTem:
        current = task.train;
        replay = res.buffer.entries();
        break;
      case Regime::kFinetune:
        current = task.train;
        break;
      case Regime::kJoint:
        params = init_mlp(te_dim, cfg.hidden, g.num_classes(), derive_seed(cfg.seed, "mlp", tau));
        for (std::size_t j = 0; j <= tau; ++j) current.insert(current.end(), res.tasks[j].train.begin(), res.tasks[j].train.end());
        break;
    }
    const WeightedBatch batch = make_replay_batch(tes, g, current, replay, cfg.loss);
    const std::span<const ClassId> allowed = cfg.scenario == Scenario::kClassIL ? std::span<const ClassId>(seen)
                                                                                 : std::span<const ClassId>(task.classes);
    train_head(params, batch, cfg, [&](const MlpParams& p) { return masked_accuracy(p, tes, g, task.valid, allowed); });

    BufferStat stat{tau, 0, 0, 0.0};
    if (cfg.regime == Regime::kTem) {
      Rng rng = make_rng(cfg.seed, "sampler", tau);
      auto chosen = update_tem(res.buffer, visible, tes, task, rng);
      if (!task.train.empty()) stat.coverage_ratio = coverage_ratio(visible, chosen, cfg.strategy.hops, task.train);
    }
    stat.entries = res.buffer.size();
    stat.bytes = res.buffer.footprint_bytes();
    res.buffer_stats.push_back(stat);

    const auto row = evaluate(params, tes, g, std::span<const TaskSpec>(res.tasks.data(), tau + 1), cfg.scenario);
    for (std::size_t j = 0; j <= tau; ++j) res.accuracy.set(tau, j, row[j]);
    res.average_accuracy.push_back(average_accuracy(res.accuracy, tau));
    res.average_forgetting.push_back(average_forgetting(res.accuracy, tau));
    res.models.push_back(params);
  }
  return res;
}

// Sampler study --------------------------------------------------------------------

struct StudyCell {
  SamplerId sampler;
  double budget;
  std::vector<double> aa;        // final AA per seed
  std::vector<double> coverage;  // mean per-task coverage per seed
};

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation; 0 for fewer than two values.
inline double stddev_of(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

/// Runs the TEM regime for every (sampler, per-task budget fraction, seed).
/// `graph_for_seed` supplies the dataset for each seed. Seeds are spread over
/// `jobs` worker threads; results are collected in seed order, so the output
/// does not depend on `jobs`.
inline std::vector<StudyCell> run_sample_study(const std::function<Graph(std::uint64_t)>& graph_for_seed,
                                               const RunConfig& base, std::span<const SamplerId> samplers,
                                               std::span<const double> budgets, std::span<const std::uint64_t> seeds,
                                               std::size_t jobs = 1) {
  std::vector<StudyCell> cells;
  for (SamplerId s : samplers) {
    for (double b : budgets) cells.push_back(StudyCell{s, b, {}, {}});
  }
  // per_seed[i][c] = (aa, coverage) of cell c under seeds[i]
  std::vector<std::vector<std::pair<double, double>>> per_seed(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  auto run_seed = [&](std::size_t i) {
    try {
      const Graph g = graph_for_seed(seeds[i]);
      for (const auto& cell : cells) {
        RunConfig cfg = base;
        cfg.regime = Regime::kTem;
        cfg.sampler = cell.sampler;
        cfg.budget = PerTaskFraction{cell.budget};
        cfg.seed = seeds[i];
        const RunResult r = run_continual(g, cfg);
        per_seed[i].emplace_back(r.final_aa(), r.mean_coverage());
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) run_seed(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < seeds.size(); i = next++) run_seed(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      cells[c].aa.push_back(per_seed[i][c].first);
      cells[c].coverage.push_back(per_seed[i][c].second);
    }
  }
  return cells;
}

}  // namespace temcgl

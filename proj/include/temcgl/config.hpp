#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/graph_io.hpp"
#include "temcgl/harness.hpp"
#include "temcgl/memory.hpp"
#include "temcgl/propagation.hpp"
#include "temcgl/sbm.hpp"

namespace temcgl {

enum class DatasetKind : std::uint8_t { kSbm, kFiles };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::kSbm;
  /// SBM parameters; the generator seed is derived from the run seed.
  SbmParams sbm{{100, 100, 100, 100, 100, 100}, 0.05, 0.005, 16, 2.0, 0.0, 0};
  GraphFiles files;

  friend bool operator==(const DatasetConfig& a, const DatasetConfig& b) {
    if (a.kind != b.kind) return false;
    if (a.kind == DatasetKind::kSbm) return a.sbm == b.sbm;
    return a.files.edges == b.files.edges && a.files.features == b.files.features &&
           a.files.labels == b.files.labels && a.files.splits == b.files.splits;
  }
};

struct StudyConfig {
  std::vector<SamplerId> samplers = {SamplerId::kUniform, SamplerId::kMeanOfFeature, SamplerId::kCoverageMax};
  std::vector<double> budgets = {0.01, 0.05, 0.4};
  std::size_t seeds = 5;

  friend bool operator==(const StudyConfig&, const StudyConfig&) = default;
};

struct ExperimentConfig {
  RunConfig run;
  DatasetConfig dataset;
  StudyConfig study;
  std::filesystem::path output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Graph for a given run seed: SBM datasets regenerate from a derived seed,
/// file datasets ignore it.
inline Graph load_dataset(const DatasetConfig& d, std::uint64_t run_seed) {
  if (d.kind == DatasetKind::kFiles) return load_graph(d.files);
  SbmParams p = d.sbm;
  p.seed = derive_seed(run_seed, "dataset");
  return generate_sbm(p);
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + f(xs[i]);
  return out;
}

/// Flat `section.key -> value` table with location info for diagnostics.
class KeyValues {
 public:
  void put(const std::string& key, const std::string& value, int line) {
    if (values_.contains(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" + key + "'");
    values_[key] = value;
  }
  bool has(const std::string& key) const { return values_.contains(key); }
  const std::string& get(const std::string& key) {
    used_.insert(key);
    return values_.at(key);
  }
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.contains(k)) out.push_back(k);
    }
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> used_;
};

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument("");
    auto x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

template <typename F>
auto wrap(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("key '" + key + "': " + e.what());
  }
}

}  // namespace detail

/// Parses the flat `[section]` / `key = value` format. Unknown sections or
/// keys, duplicates and missing dataset files are errors. Relative paths are
/// resolved against `base_dir`.
inline ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = ".") {
  static const std::map<std::string, std::set<std::string>> kSchema = {
      {"run", {"seed", "regime", "scenario", "epochs", "patience", "classes_per_task", "inter_task_edges"}},
      {"dataset",
       {"kind", "block_sizes", "p_in", "p_out", "feature_dim", "feature_shift", "degree_skew", "edges", "features",
        "labels", "splits"}},
      {"propagation",
       {"strategy", "hops", "alpha", "self_loops", "reservoir_hidden_dim", "reservoir_weight_scale", "reservoir_seed"}},
      {"memory", {"sampler", "budget_count", "budget_fraction"}},
      {"model", {"hidden", "optimizer", "learning_rate", "lambda", "class_balance"}},
      {"study", {"samplers", "budgets", "seeds"}},
      {"output", {"dir"}},
  };

  detail::KeyValues kv;
  std::string section;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = detail::trim(raw.substr(0, raw.find_first_of("#;")));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!kSchema.contains(section)) throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = detail::trim(line.substr(0, eq));
    if (!kSchema.at(section).contains(key)) {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "' in [" + section + "]");
    }
    kv.put(section + "." + key, detail::trim(line.substr(eq + 1)), lineno);
  }

  ExperimentConfig c;
  auto has = [&](const char* k) { return kv.has(k); };
  auto str = [&](const char* k) { return kv.get(k); };
  auto num = [&](const char* k) { return detail::to_double(k, kv.get(k)); };
  auto uint = [&](const char* k) { return detail::to_uint(k, kv.get(k)); };
  auto path = [&](const char* k) {
    std::filesystem::path p = kv.get(k);
    if (p.is_relative()) p = base_dir / p;
    return p;
  };

  RunConfig& r = c.run;
  if (has("run.seed")) r.seed = uint("run.seed");
  if (has("run.regime")) r.regime = detail::wrap("run.regime", [&] { return parse_regime(str("run.regime")); });
  if (has("run.scenario")) r.scenario = detail::wrap("run.scenario", [&] { return parse_scenario(str("run.scenario")); });
  if (has("run.epochs")) r.epochs = uint("run.epochs");
  if (has("run.patience")) r.patience = uint("run.patience");
  if (has("run.classes_per_task")) r.classes_per_task = uint("run.classes_per_task");
  if (has("run.inter_task_edges")) {
    r.inter_task_edges = detail::wrap("run.inter_task_edges", [&] { return parse_inter_task_edges(str("run.inter_task_edges")); });
  }

  DatasetConfig& d = c.dataset;
  if (has("dataset.kind")) {
    const auto& k = str("dataset.kind");
    if (k == "sbm") d.kind = DatasetKind::kSbm;
    else if (k == "files") d.kind = DatasetKind::kFiles;
    else throw ConfigError("key 'dataset.kind': expected sbm or files, got '" + k + "'");
  }
  if (d.kind == DatasetKind::kSbm) {
    if (has("dataset.block_sizes")) {
      d.sbm.block_sizes.clear();
      for (const auto& s : detail::split_list(str("dataset.block_sizes"))) d.sbm.block_sizes.push_back(detail::to_uint("dataset.block_sizes", s));
      if (d.sbm.block_sizes.empty()) throw ConfigError("key 'dataset.block_sizes': empty list");
    }
    if (has("dataset.p_in")) d.sbm.p_in = num("dataset.p_in");
    if (has("dataset.p_out")) d.sbm.p_out = num("dataset.p_out");
    if (has("dataset.feature_dim")) d.sbm.feature_dim = uint("dataset.feature_dim");
    if (has("dataset.feature_shift")) d.sbm.feature_shift = num("dataset.feature_shift");
    if (has("dataset.degree_skew")) d.sbm.degree_skew = num("dataset.degree_skew");
  } else {
    for (const char* k : {"dataset.edges", "dataset.features", "dataset.labels", "dataset.splits"}) {
      if (!has(k)) throw ConfigError(std::string("missing key '") + k + "' for a files dataset");
    }
    d.files = {path("dataset.edges"), path("dataset.features"), path("dataset.labels"), path("dataset.splits")};
    for (const auto& p : {d.files.edges, d.files.features, d.files.labels, d.files.splits}) {
      if (!std::filesystem::exists(p)) throw ConfigError("dataset file '" + p.string() + "' does not exist");
    }
  }

  PropagationStrategy& s = r.strategy;
  if (has("propagation.strategy")) {
    s.variant = detail::wrap("propagation.strategy", [&] { return parse_variant(str("propagation.strategy")); });
  }
  if (has("propagation.hops")) s.hops = uint("propagation.hops");
  s.alpha.reset();
  s.reservoir.reset();
  if (s.variant == Variant::kS2 || s.variant == Variant::kS3) {
    s.alpha = has("propagation.alpha") ? num("propagation.alpha") : 0.1;
  }
  if (s.variant == Variant::kReservoir) {
    ReservoirParams rp;
    if (has("propagation.reservoir_hidden_dim")) rp.hidden_dim = uint("propagation.reservoir_hidden_dim");
    if (has("propagation.reservoir_weight_scale")) rp.weight_scale = num("propagation.reservoir_weight_scale");
    if (has("propagation.reservoir_seed")) rp.seed = uint("propagation.reservoir_seed");
    s.reservoir = rp;
  }
  if (has("propagation.self_loops")) {
    r.self_loops = detail::wrap("propagation.self_loops", [&] { return parse_self_loops(str("propagation.self_loops")); });
  }

  if (has("memory.sampler")) r.sampler = detail::wrap("memory.sampler", [&] { return parse_sampler(str("memory.sampler")); });
  if (has("memory.budget_count") && has("memory.budget_fraction")) {
    throw ConfigError("[memory] takes budget_count or budget_fraction, not both");
  }
  if (has("memory.budget_count")) r.budget = PerTaskCount{uint("memory.budget_count")};
  if (has("memory.budget_fraction")) r.budget = PerTaskFraction{num("memory.budget_fraction")};

  if (has("model.hidden")) {
    r.hidden.clear();
    for (const auto& h : detail::split_list(str("model.hidden"))) r.hidden.push_back(detail::to_uint("model.hidden", h));
  }
  if (has("model.optimizer")) r.optimizer = detail::wrap("model.optimizer", [&] { return parse_optimizer(str("model.optimizer")); });
  if (has("model.learning_rate")) r.learning_rate = num("model.learning_rate");
  if (has("model.lambda")) r.loss.lambda = num("model.lambda");
  if (has("model.class_balance")) r.loss.class_balance = detail::to_bool("model.class_balance", str("model.class_balance"));

  if (has("study.samplers")) {
    c.study.samplers.clear();
    for (const auto& x : detail::split_list(str("study.samplers"))) {
      c.study.samplers.push_back(detail::wrap("study.samplers", [&] { return parse_sampler(x); }));
    }
  }
  if (has("study.budgets")) {
    c.study.budgets.clear();
    for (const auto& x : detail::split_list(str("study.budgets"))) c.study.budgets.push_back(detail::to_double("study.budgets", x));
  }
  if (has("study.seeds")) c.study.seeds = uint("study.seeds");

  if (has("output.dir")) c.output_dir = str("output.dir");

  // Keys that belong to an inactive variant (e.g. alpha for s1) are still rejected.
  if (auto unused = kv.unused(); !unused.empty()) {
    throw ConfigError("key '" + unused.front() + "' does not apply to this configuration");
  }
  detail::wrap("config", [&] {
    r.validate();
    return 0;
  });
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

/// Writes every active key; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::fmt_double;
  std::ostringstream o;
  const RunConfig& r = c.run;
  o << "[run]\n"
    << "seed = " << r.seed << "\n"
    << "regime = " << to_string(r.regime) << "\n"
    << "scenario = " << to_string(r.scenario) << "\n"
    << "epochs = " << r.epochs << "\n"
    << "patience = " << r.patience << "\n"
    << "classes_per_task = " << r.classes_per_task << "\n"
    << "inter_task_edges = " << to_string(r.inter_task_edges) << "\n\n";

  o << "[dataset]\n";
  if (c.dataset.kind == DatasetKind::kSbm) {
    const auto& p = c.dataset.sbm;
    o << "kind = sbm\n"
      << "block_sizes = " << detail::join(p.block_sizes, [](std::size_t x) { return std::to_string(x); }) << "\n"
      << "p_in = " << fmt_double(p.p_in) << "\n"
      << "p_out = " << fmt_double(p.p_out) << "\n"
      << "feature_dim = " << p.feature_dim << "\n"
      << "feature_shift = " << fmt_double(p.feature_shift) << "\n"
      << "degree_skew = " << fmt_double(p.degree_skew) << "\n\n";
  } else {
    const auto& f = c.dataset.files;
    o << "kind = files\n"
      << "edges = " << f.edges.string() << "\n"
      << "features = " << f.features.string() << "\n"
      << "labels = " << f.labels.string() << "\n"
      << "splits = " << f.splits.string() << "\n\n";
  }

  const auto& s = r.strategy;
  o << "[propagation]\n"
    << "strategy = " << to_string(s.variant) << "\n"
    << "hops = " << s.hops << "\n";
  if (s.alpha) o << "alpha = " << fmt_double(*s.alpha) << "\n";
  if (s.reservoir) {
    o << "reservoir_hidden_dim = " << s.reservoir->hidden_dim << "\n"
      << "reservoir_weight_scale = " << fmt_double(s.reservoir->weight_scale) << "\n"
      << "reservoir_seed = " << s.reservoir->seed << "\n";
  }
  o << "self_loops = " << to_string(r.self_loops) << "\n\n";

  o << "[memory]\n"
    << "sampler = " << to_string(r.sampler) << "\n";
  if (const auto* cnt = std::get_if<PerTaskCount>(&r.budget)) {
    o << "budget_count = " << cnt->count << "\n\n";
  } else {
    o << "budget_fraction = " << fmt_double(std::get<PerTaskFraction>(r.budget).fraction) << "\n\n";
  }

  o << "[model]\n"
    << "hidden = " << detail::join(r.hidden, [](std::size_t x) { return std::to_string(x); }) << "\n"
    << "optimizer = " << to_string(r.optimizer) << "\n"
    << "learning_rate = " << fmt_double(r.learning_rate) << "\n"
    << "lambda = " << fmt_double(r.loss.lambda) << "\n"
    << "class_balance = " << (r.loss.class_balance ? "true" : "false") << "\n\n";

  o << "[study]\n"
    << "samplers = " << detail::join(c.study.samplers, [](SamplerId x) { return std::string(to_string(x)); }) << "\n"
    << "budgets = " << detail::join(c.study.budgets, [](double x) { return fmt_double(x); }) << "\n"
    << "seeds = " << c.study.seeds << "\n\n";

  o << "[output]\n"
    << "dir = " << c.output_dir.string() << "\n";
  return o.str();
}

}  // namespace temcgl

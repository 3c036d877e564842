#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace temcgl::cli;
  CLI::App app{"Continual node classification with topology-aware embedding memory"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  auto add_common = [&](CLI::App* sub, bool jobs) {
    sub->add_option("--config", config, "Experiment config file")->required();
    sub->add_option("--seed", seed, "Override [run] seed");
    sub->add_option("--out", out, "Override [output] dir");
    if (jobs) sub->add_option("--jobs", common.jobs, "Seeds evaluated in parallel")->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Train over the task sequence and write CSVs");
  add_common(run, false);
  auto* study = app.add_subcommand("sample-study", "Compare samplers over budgets and seeds");
  add_common(study, true);
  auto* gen = app.add_subcommand("gen-sbm", "Write the configured SBM dataset to text files");
  add_common(gen, false);

  auto* exp = app.add_subcommand("export-embeddings", "Write per-node embeddings for a trained task");
  add_common(exp, false);
  std::size_t task = 0;
  std::string layer = "hidden";
  exp->add_option("--task", task, "Task index (0-based)")->required();
  exp->add_option("--layer", layer, "hidden or te")->check(CLI::IsMember({"hidden", "te"}));

  auto* theorem = app.add_subcommand("check-theorem", "Verify the pseudo-training gradient identity");
  std::uint64_t theorem_seed = 0;
  std::size_t trials = 100;
  double corrupt = 0.0;
  theorem->add_option("--seed", theorem_seed, "Instance seed");
  theorem->add_option("--trials", trials, "Number of random instances");
  theorem->add_option("--debug-corrupt", corrupt, "Perturb a re-weighting coefficient (negative control)");

  CLI11_PARSE(app, argc, argv);

  auto finish_common = [&](CLI::App* sub) {
    common.config = config;
    if (sub->count("--seed")) common.seed = seed;
    if (sub->count("--out")) common.out = out;
  };
  if (run->parsed()) {
    finish_common(run);
    return cmd_run(common);
  }
  if (study->parsed()) {
    finish_common(study);
    return cmd_sample_study(common);
  }
  if (gen->parsed()) {
    finish_common(gen);
    return cmd_gen_sbm(common);
  }
  if (exp->parsed()) {
    finish_common(exp);
    return cmd_export_embeddings(common, task, layer == "te" ? ExportLayer::kTe : ExportLayer::kHidden);
  }
  return cmd_check_theorem(theorem_seed, trials, corrupt);
}

#include <CLI11.hpp>

#include "headope/cli_run.hpp"

namespace {

void add_common(CLI::App* cmd, headope::cli::RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "Base seed for all randomness")
      ->each([&cfg](const std::string&) { cfg.seed_set = true; });
  cmd->add_option("--out", cfg.out_path, "Report output path (stdout when omitted)");
  cmd->add_option("--threads", cfg.threads, "Worker cap for bootstrap/episodes");
  cmd->set_config("--config", "", "Config file with long-option keys");
}

void add_estimator_knobs(CLI::App* cmd, headope::cli::RunConfig& cfg) {
  cmd->add_option("--clip", cfg.clip, "Importance-ratio clip level c");
  cmd->add_option("--n-boot", cfg.n_boot, "Bootstrap replicates (>= 100)");
  cmd->add_option("--ci-level", cfg.ci_level, "Bootstrap CI level");
  cmd->add_option("--folds", cfg.folds, "Session-level folds (0 = auto)");
  cmd->add_option("--floor-eps", cfg.floor_eps, "Propensity floor epsilon");
  cmd->add_option("--smooth-eps", cfg.smooth_eps, "Deterministic-policy smoothing epsilon");
  cmd->add_option("--gate-limit", cfg.gate_turn_limit, "Gated policies: tool window in turns");
  cmd->add_option("--lit-shift", cfg.literacy_gate_shift,
                  "PersonalizedWeights: literacy shift on the gate probability");
  cmd->add_option("--user-scale", cfg.user_scale, "Satisfaction scale: z|raw");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy evaluation for head-factorized dialogue policies"};
  app.require_subcommand(1);

  headope::cli::RunConfig cfg;

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a target policy on a log");
  evaluate->add_option("--log", cfg.log_path, "Newline-delimited JSON log")->required();
  evaluate->add_option("--policy", cfg.policy, "Target policy name or custom config path");
  evaluate->add_option("--baseline", cfg.baseline, "Baseline policy for archetype deltas");
  evaluate->add_option("--reward", cfg.reward, "Estimate the bootstrap CI covers: obj|user|total");
  evaluate->add_option("--csv", cfg.csv_path, "Also write the archetype delta table as CSV");
  add_estimator_knobs(evaluate, cfg);
  add_common(evaluate, cfg);

  CLI::App* simulate = app.add_subcommand("simulate", "Run the hidden-archetype simulator");
  simulate->add_option("--policy", cfg.policy, "heuristic|personalized|curiosity");
  simulate->add_option("--lambda", cfg.lambda, "Curiosity weight");
  simulate->add_option("--k", cfg.horizon_k, "Curiosity horizon (turns)");
  simulate->add_option("--episodes", cfg.episodes, "Episode count");
  simulate->add_option("--max-turns", cfg.max_turns, "Episode horizon");
  add_common(simulate, cfg);

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic logged-bandit dataset");
  synth->add_option("--spec", cfg.synth_spec,
                    "Preset (pilot_like|estimator_bench|selection_bench|subgroup_harm) or spec "
                    "JSON path");
  synth->add_option("--truth-out", cfg.truth_out_path,
                    "Ground-truth sidecar path (default: <out>.truth.json)");
  add_common(synth, cfg);

  CLI::App* diagnose = app.add_subcommand("diagnose", "Data-quality and calibration diagnostics");
  diagnose->add_option("--log", cfg.log_path, "Newline-delimited JSON log")->required();
  add_estimator_knobs(diagnose, cfg);
  add_common(diagnose, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : headope::cli::kExitUsage;
  }

  if (evaluate->parsed()) cfg.command = "evaluate";
  if (simulate->parsed()) cfg.command = "simulate";
  if (synth->parsed()) cfg.command = "synth";
  if (diagnose->parsed()) cfg.command = "diagnose";

  // simulate defaults to a curiosity-capable policy name check inside run();
  // default policy name for simulate is "personalized".
  if (cfg.command == "simulate" && cfg.policy == "always_tool") cfg.policy = "personalized";

  return headope::cli::run(cfg);
}

#pragma once

#include <cstdint>
#include <string>

namespace headope::cli {

// Exit codes shared by the CLI and the library-level runner.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitEstimation = 4;

struct RunConfig {
  std::string command;  // evaluate | simulate | synth | diagnose

  // Inputs / outputs.
  std::string log_path;
  std::string out_path;
  std::string csv_path;        // optional per-archetype CSV (evaluate)
  std::string truth_out_path;  // synth ground-truth sidecar; default <out>.truth.json

  // Policy selection (evaluate): a named policy or a path to a custom
  // policy config JSON. Baseline anchors the per-archetype deltas.
  std::string policy = "always_tool";
  std::string baseline = "no_tool";

  // Estimator knobs.
  std::string reward = "total";  // which estimate the bootstrap CI covers: obj|user|total
  double clip = 50.0;
  int n_boot = 1000;
  double ci_level = 0.95;
  int folds = 0;  // 0: auto (5, or 3 when sessions < 10)
  double floor_eps = 0.01;
  double smooth_eps = 0.01;
  int gate_turn_limit = 10;
  double literacy_gate_shift = 0.2;
  std::string user_scale = "z";  // z | raw

  // Curiosity / simulator knobs.
  double lambda = 0.1;
  int horizon_k = 2;
  int episodes = 200;
  int max_turns = 12;

  // Synth.
  std::string synth_spec = "pilot_like";  // preset name or path to a spec JSON

  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;
};

// Validates semantic knob ranges (throws UsageError).
void validate_config(const RunConfig& config);

// Executes the command, writes the report file(s), and returns the exit
// code. Errors are reported as machine-readable JSON error objects
// (written to the output path when one is set) plus a stderr line.
int run(const RunConfig& config);

}  // namespace headope::cli

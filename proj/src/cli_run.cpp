#include "headope/cli_run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "headope/errors.hpp"
#include "headope/model.hpp"
#include "headope/ope.hpp"
#include "headope/simulator.hpp"
#include "headope/synth.hpp"

namespace headope::cli {

using nlohmann::json;

namespace {

constexpr const char* kSchemaVersion = "1.0";

json config_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["log"] = c.log_path;
  j["out"] = c.out_path;
  j["policy"] = c.policy;
  j["baseline"] = c.baseline;
  j["reward"] = c.reward;
  j["clip"] = c.clip;
  j["n_boot"] = c.n_boot;
  j["ci_level"] = c.ci_level;
  j["folds"] = c.folds;
  j["floor_eps"] = c.floor_eps;
  j["smooth_eps"] = c.smooth_eps;
  j["gate_turn_limit"] = c.gate_turn_limit;
  j["literacy_gate_shift"] = c.literacy_gate_shift;
  j["user_scale"] = c.user_scale;
  j["lambda"] = c.lambda;
  j["horizon_k"] = c.horizon_k;
  j["episodes"] = c.episodes;
  j["max_turns"] = c.max_turns;
  j["synth_spec"] = c.synth_spec;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write output file: " + path);
  out << text;
}

void emit_report(const RunConfig& c, json body) {
  body["schema_version"] = kSchemaVersion;
  body["command"] = c.command;
  body["seed"] = c.seed;
  body["config"] = config_json(c);
  const std::string text = body.dump(2) + "\n";
  if (!c.out_path.empty()) {
    write_text(c.out_path, text);
  } else {
    std::cout << text;
  }
}

json validation_json(const ValidationReport& v) {
  json j;
  j["sessions"] = v.n_sessions;
  j["users"] = v.n_users;
  j["turns"] = v.n_turns;
  j["rated_turns"] = v.n_rated;
  j["rating_rate"] = v.rating_rate;
  j["turn_index_conflicts"] = v.turn_index_conflicts;
  j["warnings"] = v.warnings;
  return j;
}

json diagnostics_json(const DiagnosticsBlock& d) {
  json j;
  j["sessions"] = d.n_sessions;
  j["turns"] = d.n_turns;
  j["rating_rate"] = d.rating_rate;
  j["clipping_rate"] = d.clipping_rate;
  j["effective_sample_size"] = d.ess;
  j["ece_tool"] = d.ece_tool;
  j["ece_style"] = d.ece_style;
  if (d.rating_auc_defined) j["rating_propensity_auc"] = d.rating_auc;
  j["floor_hits_tool"] = d.floor_hits_tool;
  j["floor_hits_style"] = d.floor_hits_style;
  j["tool_head_degenerate"] = d.tool_degenerate;
  j["style_head_degenerate"] = d.style_degenerate;
  j["no_rating_selection"] = d.no_selection;
  j["rating_propensity_floor_hits"] = d.p_rate_floor_hits;
  return j;
}

json estimates_json(const PolicyEstimates& e, const std::string& ci_reward) {
  json j;
  j["policy"] = e.policy;
  j["r_obj_snips"] = e.r_obj_snips;
  j["r_user_aipw"] = e.r_user_aipw;
  j["r_total"] = e.r_total;
  if (e.ci_valid) {
    j["ci"] = {{"reward", ci_reward},
               {"low", e.ci_low},
               {"high", e.ci_high},
               {"bootstrap_failures", e.boot_failures},
               {"wide_interval_warning", e.boot_warning}};
  }
  return j;
}

json archetype_table_json(const std::array<ArchetypeDelta, kNumArchetypes>& deltas) {
  json arr = json::array();
  for (const ArchetypeDelta& d : deltas) {
    json row;
    row["archetype"] = archetype_name(d.archetype);
    row["present"] = d.present;
    if (d.present) {
      row["delta_objective"] = d.delta_objective;
      row["delta_satisfaction"] = d.delta_satisfaction;
      row["sessions"] = d.n_sessions;
      row["turns"] = d.n_turns;
    }
    arr.push_back(row);
  }
  return arr;
}

void write_archetype_csv(const std::string& path,
                         const std::array<ArchetypeDelta, kNumArchetypes>& deltas) {
  std::ostringstream os;
  os << "archetype,present,delta_objective,delta_satisfaction,sessions,turns\n";
  for (const ArchetypeDelta& d : deltas) {
    os << archetype_name(d.archetype) << ',' << (d.present ? 1 : 0) << ',';
    if (d.present) {
      os << d.delta_objective << ',' << d.delta_satisfaction << ',' << d.n_sessions << ','
         << d.n_turns;
    } else {
      os << ",,,";
    }
    os << '\n';
  }
  write_text(path, os.str());
}

PolicySpec policy_spec_from_arg(const RunConfig& c, const std::string& arg) {
  PolicySpec spec;
  spec.gate_turn_limit = c.gate_turn_limit;
  spec.literacy_gate_shift = c.literacy_gate_shift;
  spec.smooth_eps = c.smooth_eps;
  try {
    spec.kind = policy_kind_from_string(arg);
    if (spec.kind == PolicyKind::Custom) {
      throw UsageError("custom policies are selected by passing the config path as --policy");
    }
    return spec;
  } catch (const UsageError&) {
    if (arg == "custom") throw;
  }
  // Not a known name: treat as a path to a custom policy config.
  std::ifstream in(arg);
  if (!in) {
    throw UsageError("policy '" + arg + "' is neither a known name nor a readable config file");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  spec.kind = PolicyKind::Custom;
  spec.custom_config_json = buf.str();
  return spec;
}

UserRewardScale scale_from_string(const std::string& s) {
  if (s == "z") return UserRewardScale::PerUserZ;
  if (s == "raw") return UserRewardScale::Raw;
  throw UsageError("user scale must be 'z' or 'raw'");
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions opt;
  opt.clip = c.clip;
  opt.n_boot = c.n_boot;
  opt.ci_level = c.ci_level;
  opt.n_folds = c.folds;
  opt.floor_eps = c.floor_eps;
  opt.scale = scale_from_string(c.user_scale);
  opt.seed = c.seed;
  opt.threads = c.threads;
  return opt;
}

int run_evaluate(const RunConfig& c) {
  const auto sessions = parse_log_file(c.log_path);
  const ValidationReport validation = validate_sessions(sessions);
  if (sessions.empty()) throw ValidationError("log contains no sessions");

  const EvalOptions opt = eval_options(c);
  const EvalContext ctx = EvalContext::fit(sessions, opt);

  const PolicySpec target_spec = policy_spec_from_arg(c, c.policy);
  const PolicySpec baseline_spec = policy_spec_from_arg(c, c.baseline);
  const auto target = make_policy(target_spec, ctx.stats);
  const auto baseline = make_policy(baseline_spec, ctx.stats);

  const PolicyTurnArrays target_arrays = build_policy_arrays(ctx, *target, opt);
  const DiagnosticsBlock diag = diagnostics(ctx, target_arrays.ratios);

  try {
    PolicyEstimates est;
    est.policy = target->name();
    std::vector<size_t> all(ctx.data.n_sessions());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    est.r_obj_snips = snips_over_sessions(ctx.data, target_arrays, all, false);
    est.r_user_aipw = aipw_over_sessions(ctx, target_arrays, all, false);
    est.r_total = r_total_over_sessions(ctx, target_arrays, all);

    const auto boot_estimator = [&](std::span<const size_t> subset) {
      if (c.reward == "obj") return snips_over_sessions(ctx.data, target_arrays, subset, false);
      if (c.reward == "user") return aipw_over_sessions(ctx, target_arrays, subset, false);
      return r_total_over_sessions(ctx, target_arrays, subset);
    };
    const BootstrapResult boot =
        bootstrap_ci(ctx.data.n_sessions(), boot_estimator, opt.n_boot, opt.ci_level, opt.seed,
                     opt.threads);
    est.ci_low = boot.low;
    est.ci_high = boot.high;
    est.ci_valid = true;
    est.boot_failures = boot.n_failures;
    est.boot_warning = boot.wide_interval_warning;

    const PolicyTurnArrays baseline_arrays = build_policy_arrays(ctx, *baseline, opt);
    const auto deltas = slice_by_archetype(ctx, target_arrays, baseline_arrays);

    json body;
    body["validation"] = validation_json(validation);
    body["estimates"] = estimates_json(est, c.reward);
    body["baseline"] = baseline->name();
    body["archetype_deltas"] = archetype_table_json(deltas);
    body["diagnostics"] = diagnostics_json(diag);
    emit_report(c, std::move(body));
    if (!c.csv_path.empty()) write_archetype_csv(c.csv_path, deltas);
    return kExitOk;
  } catch (const EstimationError& e) {
    // Estimation failures still emit diagnostics.
    json body;
    body["error"] = {{"type", "estimation"}, {"message", e.what()}};
    body["validation"] = validation_json(validation);
    body["diagnostics"] = diagnostics_json(diag);
    emit_report(c, std::move(body));
    std::cerr << "estimation failure: " << e.what() << '\n';
    return kExitEstimation;
  }
}

int run_simulate(const RunConfig& c) {
  const sim::SimPolicyKind kind = sim::sim_policy_from_string(c.policy);
  sim::SimConfig cfg;
  cfg.max_turns = c.max_turns;
  const CuriositySchedule schedule{c.lambda, c.horizon_k};
  const sim::SimRunResult result =
      sim::run_policy(kind, c.episodes, cfg, schedule, c.seed, c.threads);

  json body;
  body["policy"] = sim::to_string(kind);
  body["metrics"] = {{"episodes", result.metrics.episodes},
                     {"final_return", result.metrics.final_return},
                     {"goal_success", result.metrics.goal_success},
                     {"pass_at_3", result.metrics.pass_at_3},
                     {"trait_id_turn", result.metrics.trait_id_turn},
                     {"trait_id_rate", result.metrics.trait_id_rate},
                     {"trait_accuracy", result.metrics.trait_accuracy},
                     {"archetype_alignment", result.metrics.archetype_alignment}};
  emit_report(c, std::move(body));
  return kExitOk;
}

int run_synth(const RunConfig& c) {
  synth::SynthSpec spec;
  if (c.synth_spec == "pilot_like" || c.synth_spec == "estimator_bench" ||
      c.synth_spec == "selection_bench" || c.synth_spec == "subgroup_harm") {
    spec = synth::SynthSpec::from_json("{\"name\": \"" + c.synth_spec + "\"}");
  } else {
    std::ifstream in(c.synth_spec);
    if (!in) throw UsageError("synth spec '" + c.synth_spec + "' is neither a preset nor a file");
    std::stringstream buf;
    buf << in.rdbuf();
    spec = synth::SynthSpec::from_json(buf.str());
  }

  const synth::SynthResult result = synth::generate(spec, c.seed);
  if (c.out_path.empty()) throw UsageError("synth requires --out");
  write_text(c.out_path, write_log_string(result.sessions));

  json truth;
  truth["schema_version"] = kSchemaVersion;
  truth["seed"] = c.seed;
  truth["spec"] = json::parse(spec.to_json());
  if (result.truth.oracle_rating_auc_defined) {
    truth["oracle_rating_auc"] = result.truth.oracle_rating_auc;
  }
  json policies = json::array();
  for (const synth::PolicyValues& v : result.truth.policies) {
    json p;
    p["policy"] = v.policy;
    p["v_obj"] = v.v_obj;
    p["v_user"] = v.v_user;
    p["v_total"] = v.v_total;
    json by_arch = json::object();
    for (int a = 0; a < kNumArchetypes; ++a) {
      if (!v.arch_present[static_cast<size_t>(a)]) continue;
      by_arch[archetype_name(a)] = {{"v_obj", v.v_obj_by_arch[static_cast<size_t>(a)]},
                                    {"v_user", v.v_user_by_arch[static_cast<size_t>(a)]}};
    }
    p["by_archetype"] = by_arch;
    policies.push_back(p);
  }
  truth["analytic_policy_values"] = policies;

  const std::string truth_path =
      c.truth_out_path.empty() ? c.out_path + ".truth.json" : c.truth_out_path;
  write_text(truth_path, truth.dump(2) + "\n");
  return kExitOk;
}

int run_diagnose(const RunConfig& c) {
  const auto sessions = parse_log_file(c.log_path);
  const ValidationReport validation = validate_sessions(sessions);
  if (sessions.empty()) throw ValidationError("log contains no sessions");

  const EvalOptions opt = eval_options(c);
  const EvalContext ctx = EvalContext::fit(sessions, opt);

  // Ratios of the identity policy: diagnostics without a counterfactual.
  const BehaviorMirrorPolicy mirror(&*ctx.tool_model, &*ctx.style_model);
  const auto ratios = compute_ratios(mirror, ctx.data, ctx.props, opt.clip);
  const DiagnosticsBlock diag = diagnostics(ctx, ratios);

  // Tool performance by type (success rates mirror).
  json tools = json::object();
  for (int tool = 1; tool < kNumTools; ++tool) {
    size_t invoked = 0, success = 0;
    for (const Session& s : sessions) {
      for (const LoggedTurn& t : s.turns) {
        if (static_cast<int>(t.action.tool) == tool) {
          ++invoked;
          success += t.outcome == ToolOutcome::Success ? 1 : 0;
        }
      }
    }
    json entry;
    entry["invocations"] = invoked;
    entry["successes"] = success;
    if (invoked > 0) entry["success_rate"] = static_cast<double>(success) / static_cast<double>(invoked);
    tools[to_string(static_cast<Tool>(tool))] = entry;
  }

  // Session-fold sizes from the fitted propensity model.
  json fold_sizes = json::array();
  if (ctx.tool_model) {
    std::map<int, int> counts;
    for (int f : ctx.tool_model->fold_of_session) ++counts[f];
    for (const auto& [fold, count] : counts) {
      fold_sizes.push_back({{"fold", fold}, {"sessions", count}});
    }
  }

  json body;
  body["validation"] = validation_json(validation);
  body["diagnostics"] = diagnostics_json(diag);
  body["tool_performance"] = tools;
  body["fold_sizes"] = fold_sizes;
  emit_report(c, std::move(body));
  return kExitOk;
}

}  // namespace

void validate_config(const RunConfig& c) {
  if (c.command != "evaluate" && c.command != "simulate" && c.command != "synth" &&
      c.command != "diagnose") {
    throw UsageError("unknown command '" + c.command + "'");
  }
  if (!(c.clip > 0.0)) throw UsageError("clip must be > 0");
  if (c.n_boot < 100) throw UsageError("n_boot must be >= 100");
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) throw UsageError("ci-level must be in (0,1)");
  if (c.folds != 0 && c.folds < 2) throw UsageError("folds must be 0 (auto) or >= 2");
  if (!(c.floor_eps > 0.0 && c.floor_eps < 0.2)) throw UsageError("floor-eps must be in (0,0.2)");
  if (c.smooth_eps < 0.0 || c.smooth_eps >= 0.2) throw UsageError("smooth-eps must be in [0,0.2)");
  if (c.lambda < 0.0 || c.lambda > 1.0) throw UsageError("lambda must be in [0,1]");
  if (c.horizon_k < 0) throw UsageError("k must be >= 0");
  if (c.episodes < 1) throw UsageError("episodes must be >= 1");
  if (c.max_turns < 1 || c.max_turns > 200) throw UsageError("max-turns must be in [1,200]");
  if (c.threads < 1 || c.threads > 256) throw UsageError("threads must be in [1,256]");
  if (c.user_scale != "z" && c.user_scale != "raw") throw UsageError("user-scale must be z|raw");
  if (c.reward != "obj" && c.reward != "user" && c.reward != "total") {
    throw UsageError("reward must be obj|user|total");
  }
  if ((c.command == "simulate" || c.command == "synth") && !c.seed_set) {
    throw UsageError(c.command + " requires --seed");
  }
  if ((c.command == "evaluate" || c.command == "diagnose") && c.log_path.empty()) {
    throw UsageError(c.command + " requires --log");
  }
}

int run(const RunConfig& c) {
  try {
    validate_config(c);
    if (c.command == "evaluate") return run_evaluate(c);
    if (c.command == "simulate") return run_simulate(c);
    if (c.command == "synth") return run_synth(c);
    return run_diagnose(c);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ContractError& e) {
    // Contract violations triggered by data shape (e.g. fewer sessions
    // than folds) surface as validation failures at the CLI boundary.
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const EstimationError& e) {
    std::cerr << "estimation failure: " << e.what() << '\n';
    return kExitEstimation;
  }
}

}  // namespace headope::cli

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "headope/model.hpp"
#include "headope/ope.hpp"
#include "headope/policies.hpp"

namespace headope::synth {

// ---------------------------------------------------------------------------
// Synthetic logged-bandit generator with analytic ground truth. The logging
// policy, reward means and rating-missingness mechanism are all known, so
// target-policy values can be computed exactly and the estimators validated
// against them.
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::string name = "custom";

  int n_sessions = 23;
  int n_users = 7;
  int turns_per_session = 15;
  int total_turns = 0;  // when > 0, distributes turns so the log totals exactly this

  // Users are assigned archetypes by cycling through this mix (largest
  // shares first); sessions cycle through users.
  std::array<double, kNumArchetypes> archetype_mix{0.25, 0.25, 0.25, 0.25};

  // Rating model: mean per (archetype, joint action), minus a penalty on
  // tool failure, then clamp(round(Normal(mean, sigma)), 1, 5).
  double rating_sigma = 0.7;
  double failure_penalty = 0.8;
  std::array<std::array<double, kNumJointActions>, kNumArchetypes> rating_mean{};

  // Tool success probability per (archetype, tool); Tool::None unused.
  std::array<std::array<double, kNumTools>, kNumArchetypes> tool_success{};

  // P(user asks for an explanation), i.i.d. per turn, per archetype.
  std::array<double, kNumArchetypes> ask_explain_prob{0.30, 0.45, 0.50, 0.25};

  // Tabular logging policy on the pre-action context
  // (archetype, turn gate, previous outcome, asked-explain).
  struct Logging {
    std::array<double, kNumTools> tool_base{1.2, 0.9, 0.8, 0.35};  // unnormalized weights
    double none_boost_gate_off = 2.2;
    double none_boost_prev_fail = 1.6;
    double search_boost_ask = 1.7;
    int gate_turn_limit = 10;
    double style_base = 0.30;        // P(detailed) = clamp(base + ask + low-lit, .05, .95)
    double style_ask_coef = 0.40;
    double style_low_lit_coef = 0.10;
  } logging;

  // Rating-missingness mechanism: P(rated | x) = sigmoid(linear in
  // (literacy, efficacy, asked-explain, previous-outcome signal)). All
  // regressors live in the propensity feature vector, so the fitted
  // rating-propensity model is well-specified.
  struct Missingness {
    bool enabled = false;
    double intercept = 1.4;   // re-solved from target_rate when target_rate > 0
    double lit_coef = 1.3;
    double eff_coef = -1.1;
    double ask_coef = 0.5;
    double prev_coef = 0.4;
    double target_rate = -1.0;
  } missing;

  // Latency supports (uniform over the listed values), per action group.
  std::vector<double> latency_none{4.0, 8.0, 14.0};
  std::vector<double> latency_tool{12.0, 24.0, 45.0};

  // Named presets.
  static SynthSpec pilot_like();       // 23 sessions / 7 users / 350 turns, missingness at 0.8
  static SynthSpec estimator_bench();  // 50k turns, every turn rated
  static SynthSpec selection_bench();  // 21k turns, MNAR ratings with oracle AUC near 0.7
  static SynthSpec subgroup_harm();    // tools help high-literacy, hurt low-lit/high-eff

  static SynthSpec from_json(const std::string& text);
  std::string to_json() const;

  // Fills rating_mean from a base level per archetype plus a tool-affinity
  // shift and a preferred-style bonus.
  void build_rating_means(const std::array<double, kNumArchetypes>& base,
                          const std::array<double, kNumArchetypes>& tool_effect,
                          double style_bonus, const std::array<Style, kNumArchetypes>& pref_style);
};

struct PolicyValues {
  std::string policy;
  double v_obj = 0.0;    // E_pi[r_tool + r_eng]
  double v_user = 0.0;   // E_pi[expected rating] (raw scale)
  double v_total = 0.0;  // literacy-weighted composition
  std::array<double, kNumArchetypes> v_obj_by_arch{};
  std::array<double, kNumArchetypes> v_user_by_arch{};
  std::array<bool, kNumArchetypes> arch_present{};
};

struct GroundTruth {
  PropensitySet oracle_props;        // true logging propensities per turn
  std::vector<double> oracle_p_rate; // true P(rated | x) per turn (all 1 when missingness off)
  double oracle_rating_auc = 0.5;    // AUC of the true propensities vs realized labels
  bool oracle_rating_auc_defined = false;
  std::vector<PolicyValues> policies;  // the four named policies, as constructed on this log
};

struct SynthResult {
  std::vector<Session> sessions;
  GroundTruth truth;
};

// Deterministic given (spec, seed); same seed gives a byte-identical log.
SynthResult generate(const SynthSpec& spec, uint64_t seed);

// Exact value of a target policy under the spec's logging context
// distribution, by forward recursion over (archetype, turn, previous
// outcome, asked-explain) cells. The policy may only read the discrete
// pre-action context (the named policies and custom tables qualify).
PolicyValues analytic_policy_value(const SynthSpec& spec, const Policy& policy,
                                   std::span<const Session> sessions);

}  // namespace headope::synth

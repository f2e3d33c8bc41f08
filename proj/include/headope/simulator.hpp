#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "headope/model.hpp"
#include "headope/rewards.hpp"
#include "headope/rng.hpp"

namespace headope::sim {

// ---------------------------------------------------------------------------
// Hidden-archetype user simulator. Policies act only through the
// (Tool, Style) heads; the archetype never appears in policy-visible state.
// ---------------------------------------------------------------------------

enum class TaskKind : uint8_t { TimeseriesAnalysis = 0, WellnessApi = 1 };

std::string to_string(TaskKind k);

// Tool whose success completes a task of this kind.
Tool needed_tool(TaskKind kind);

struct SimTask {
  TaskKind kind = TaskKind::TimeseriesAnalysis;
  std::string spec;  // required end-state, human-readable
  bool completed = false;
  int completed_turn = 0;  // 1-based; 0 when incomplete
};

// Fixed per-archetype interaction profile: whether heavy tool use is
// welcome and which response style is preferred. Chosen so tool-heavy
// play helps L_high x E_low users and hurts L_low x E_high users.
struct ArchetypeProfile {
  bool wants_tool = false;
  Style preferred_style = Style::Concise;
};
const ArchetypeProfile& archetype_profile(int archetype);

struct SimConfig {
  int max_turns = 12;
  int tasks_per_episode = 2;
  std::array<double, kNumArchetypes> archetype_prior{0.25, 0.25, 0.25, 0.25};

  // Tool success probabilities (Search, Code, Email); defaults are the
  // observed per-tool success rates.
  std::array<double, kNumTools> tool_success{0.0, 0.816, 0.807, 0.857};

  // Rating rubric: base + match bonuses - failure penalty + noise,
  // clamp(round(.), 1, 5).
  double rating_base = 3.4;
  double tool_match_bonus = 0.8;
  double style_match_bonus = 0.5;
  double failure_penalty = 1.0;
  double rating_sigma = 1.0;

  // Style-preference cue: probability the user asks for an explanation
  // next turn, given whether the previous style matched their preference.
  double ask_prob_style_mismatch = 0.55;  // prefers detailed, got concise
  double ask_prob_otherwise = 0.12;
  double ask_prob_first_pref_detailed = 0.35;  // turn 1, before any style
  double ask_prob_first_other = 0.10;

  // Personalized policy knobs.
  double confidence_threshold = 0.65;  // act on the belief above this
  double trait_id_threshold = 0.8;     // trait-identification threshold on max posterior

  int pass_k = 3;  // rollouts per episode for pass@k
};

// Policy-visible observation after a turn (used for belief updates).
struct SimObservation {
  ActionPair action;
  ToolOutcome outcome = ToolOutcome::NotInvoked;
  int rating = 0;
  bool next_asked_explain = false;
};

// Exact observation likelihoods under the rubric; the lightweight user
// model that drives posteriors and the curiosity lookahead.
class ObservationModel {
 public:
  explicit ObservationModel(const SimConfig& config) : cfg_(config) {}

  double rating_mean(int archetype, const ActionPair& action, ToolOutcome outcome) const;
  double ask_prob(int archetype, Style previous_style) const;
  double ask_prob_first(int archetype) const;

  std::array<double, kNumArchetypes> likelihood(const SimObservation& obs) const;

  // One-step lookahead: expected posterior entropy after playing `action`
  // under `belief`, marginalizing outcome, rating and the next ask cue.
  double expected_posterior_entropy(const ArchetypePosterior& belief,
                                    const ActionPair& action) const;

 private:
  SimConfig cfg_;
};

// Bayes update with explicit per-archetype likelihoods. Throws on
// numerically degenerate (all-zero) likelihoods.
ArchetypePosterior bayes_update(const ArchetypePosterior& prior,
                                std::span<const double> likelihoods);

// Bayes update from an observation via the observation model.
ArchetypePosterior posterior_update(const ObservationModel& model, const ArchetypePosterior& prior,
                                    const SimObservation& obs);

// ---------------------------------------------------------------------------
// Hidden user state and stepping.
// ---------------------------------------------------------------------------

struct SimUserState {
  int archetype = 0;  // hidden from the policy
  int turns_taken = 0;
  int max_turns = 12;
  double patience = 1.0;          // decays on tool failures
  double satisfaction_sum = 0.0;  // accumulated ratings
  Rng rng;

  SimUserState(int arch, int horizon, Rng noise)
      : archetype(arch), max_turns(horizon), rng(std::move(noise)) {}
  bool terminated() const { return turns_taken >= max_turns; }
};

struct UserStepResult {
  SimObservation obs;
  TurnFeatures features;
};

// Advances the simulated user by one turn: draws the tool outcome, a
// rubric rating, the next ask cue and response features, and marks task
// completions. Throws ContractError once the episode has terminated.
UserStepResult user_step(SimUserState& state, const ActionPair& action,
                         std::vector<SimTask>& tasks, const SimConfig& config,
                         const ObservationModel& model, bool asked_explain_cue);

// ---------------------------------------------------------------------------
// Episodes and traces.
// ---------------------------------------------------------------------------

struct SimTurnRecord {
  int turn = 0;  // 1-based
  ActionPair action;
  ToolOutcome outcome = ToolOutcome::NotInvoked;
  int rating = 0;
  bool asked_explain = false;  // cue visible when the action was chosen
  TurnFeatures features;       // latency/chars/citation/structure for engagement
  ArchetypePosterior posterior;  // after this turn's update
  double curiosity_raw = 0.0;    // entropy drop, >= 0
  double curiosity_applied = 0.0;  // lambda_t * curiosity_raw
  bool aligned = false;  // action matches the true archetype's preferred profile
};

struct EpisodeTrace {
  uint64_t seed = 0;
  size_t episode_index = 0;
  int archetype = 0;  // hidden from the policy
  std::vector<SimTask> tasks;
  std::vector<SimTurnRecord> turns;

  bool goal_success = false;          // every task completed
  std::optional<int> trait_id_turn;   // first turn max posterior >= threshold
  bool trait_correct = false;         // argmax posterior at end == archetype
  double alignment_rate = 0.0;
  double final_return = 0.0;
  double curiosity_total = 0.0;  // sum of applied bonuses
};

enum class SimPolicyKind { Heuristic, Personalized, PersCuriosity };
SimPolicyKind sim_policy_from_string(const std::string& name);
std::string to_string(SimPolicyKind k);

struct SimMetrics {
  size_t episodes = 0;
  double final_return = 0.0;
  double goal_success = 0.0;
  double pass_at_3 = 0.0;
  double trait_id_turn = 0.0;  // unidentified episodes counted as max_turns + 1
  double trait_id_rate = 0.0;  // fraction identified within the horizon
  double trait_accuracy = 0.0;
  double archetype_alignment = 0.0;
};

struct SimRunResult {
  SimMetrics metrics;
  std::vector<EpisodeTrace> traces;  // primary rollout of each episode
};

// Samples episode setup (hidden archetype + tasks); deterministic in
// (config, seed, episode_index).
struct EpisodeSetup {
  int archetype = 0;
  std::vector<SimTask> tasks;
};
EpisodeSetup sample_episode(const SimConfig& config, uint64_t seed, size_t episode_index = 0);

// Runs one episode rollout. rollout_index varies the in-episode noise
// while keeping the setup fixed (pass@k).
EpisodeTrace run_episode(SimPolicyKind policy, const SimConfig& config,
                         const CuriositySchedule& schedule, uint64_t seed, size_t episode_index,
                         size_t rollout_index = 0);

// Runs n_episodes (each with pass_k rollouts) and aggregates metrics.
// Identical (policy, config, schedule, seed) reproduce identical results;
// different policies on the same seed see identical episode setups.
SimRunResult run_policy(SimPolicyKind policy, int n_episodes, const SimConfig& config,
                        const CuriositySchedule& schedule, uint64_t seed, int threads = 1);

// Recomputes goal success from a trace's per-turn records (verifiable
// end-states; no hidden judge).
bool verify_goal_success(const EpisodeTrace& trace, const SimConfig& config);

// Recomputes the trace return from per-turn records.
double recompute_return(const EpisodeTrace& trace, const SimConfig& config,
                        const CuriositySchedule& schedule, SimPolicyKind policy);

}  // namespace headope::sim

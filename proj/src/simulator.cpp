#include "headope/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "headope/parallel.hpp"
#include "headope/rating_model.hpp"
#include "headope/rng.hpp"

namespace headope::sim {

std::string to_string(TaskKind k) {
  return k == TaskKind::TimeseriesAnalysis ? "timeseries_analysis" : "wellness_api";
}

Tool needed_tool(TaskKind kind) {
  return kind == TaskKind::TimeseriesAnalysis ? Tool::Code : Tool::Email;
}

const ArchetypeProfile& archetype_profile(int archetype) {
  // 0: L_high x E_high  1: L_high x E_low  2: L_low x E_low  3: L_low x E_high
  static const std::array<ArchetypeProfile, kNumArchetypes> profiles = {{
      {true, Style::Concise},
      {true, Style::Detailed},
      {false, Style::Detailed},
      {false, Style::Concise},
  }};
  if (archetype < 0 || archetype >= kNumArchetypes) {
    throw ContractError("archetype index out of range");
  }
  return profiles[static_cast<size_t>(archetype)];
}

SimPolicyKind sim_policy_from_string(const std::string& name) {
  if (name == "heuristic") return SimPolicyKind::Heuristic;
  if (name == "personalized") return SimPolicyKind::Personalized;
  if (name == "curiosity") return SimPolicyKind::PersCuriosity;
  throw UsageError("unknown simulator policy '" + name +
                   "' (expected heuristic|personalized|curiosity)");
}

std::string to_string(SimPolicyKind k) {
  switch (k) {
    case SimPolicyKind::Heuristic: return "heuristic";
    case SimPolicyKind::Personalized: return "personalized";
    case SimPolicyKind::PersCuriosity: return "curiosity";
  }
  throw ContractError("invalid SimPolicyKind");
}

// ---------------------------------------------------------------------------
// Observation model.
// ---------------------------------------------------------------------------

double ObservationModel::rating_mean(int archetype, const ActionPair& action,
                                     ToolOutcome outcome) const {
  const ArchetypeProfile& prof = archetype_profile(archetype);
  double m = cfg_.rating_base;
  if ((action.tool != Tool::None) == prof.wants_tool) m += cfg_.tool_match_bonus;
  if (action.style == prof.preferred_style) m += cfg_.style_match_bonus;
  if (outcome == ToolOutcome::Failure) m -= cfg_.failure_penalty;
  return m;
}

double ObservationModel::ask_prob(int archetype, Style previous_style) const {
  const ArchetypeProfile& prof = archetype_profile(archetype);
  if (prof.preferred_style == Style::Detailed && previous_style == Style::Concise) {
    return cfg_.ask_prob_style_mismatch;
  }
  return cfg_.ask_prob_otherwise;
}

double ObservationModel::ask_prob_first(int archetype) const {
  return archetype_profile(archetype).preferred_style == Style::Detailed
             ? cfg_.ask_prob_first_pref_detailed
             : cfg_.ask_prob_first_other;
}

std::array<double, kNumArchetypes> ObservationModel::likelihood(const SimObservation& obs) const {
  if (obs.rating < 1 || obs.rating > 5) throw ContractError("likelihood: rating outside [1,5]");
  std::array<double, kNumArchetypes> like{};
  for (int y = 0; y < kNumArchetypes; ++y) {
    const auto pmf = clamped_rating_pmf(rating_mean(y, obs.action, obs.outcome), cfg_.rating_sigma);
    const double p_rating = pmf[static_cast<size_t>(obs.rating - 1)];
    const double p_ask = ask_prob(y, obs.action.style);
    like[static_cast<size_t>(y)] =
        p_rating * (obs.next_asked_explain ? p_ask : 1.0 - p_ask);
  }
  return like;
}

double ObservationModel::expected_posterior_entropy(const ArchetypePosterior& belief,
                                                    const ActionPair& action) const {
  struct Branch {
    ToolOutcome outcome;
    double prob;
  };
  std::vector<Branch> branches;
  if (action.tool == Tool::None) {
    branches.push_back({ToolOutcome::NotInvoked, 1.0});
  } else {
    const double ps = cfg_.tool_success[static_cast<size_t>(action.tool)];
    branches.push_back({ToolOutcome::Success, ps});
    branches.push_back({ToolOutcome::Failure, 1.0 - ps});
  }

  double expected = 0.0;
  for (const Branch& br : branches) {
    if (br.prob == 0.0) continue;
    // Cache per-archetype rating pmfs and ask probabilities for this branch.
    std::array<std::array<double, 5>, kNumArchetypes> pmf;
    std::array<double, kNumArchetypes> ask;
    for (int y = 0; y < kNumArchetypes; ++y) {
      pmf[static_cast<size_t>(y)] =
          clamped_rating_pmf(rating_mean(y, action, br.outcome), cfg_.rating_sigma);
      ask[static_cast<size_t>(y)] = ask_prob(y, action.style);
    }
    for (int rating = 1; rating <= 5; ++rating) {
      for (int asked = 0; asked <= 1; ++asked) {
        double obs_prob = 0.0;
        std::array<double, kNumArchetypes> post{};
        for (int y = 0; y < kNumArchetypes; ++y) {
          const auto yi = static_cast<size_t>(y);
          const double pa = asked == 1 ? ask[yi] : 1.0 - ask[yi];
          const double l = pmf[yi][static_cast<size_t>(rating - 1)] * pa;
          post[yi] = belief.probs[yi] * l;
          obs_prob += post[yi];
        }
        if (obs_prob <= 0.0) continue;
        double h = 0.0;
        for (double& p : post) {
          p /= obs_prob;
          if (p > 0.0) h -= p * std::log2(p);
        }
        expected += br.prob * obs_prob * h;
      }
    }
  }
  return expected;
}

ArchetypePosterior bayes_update(const ArchetypePosterior& prior,
                                std::span<const double> likelihoods) {
  if (likelihoods.size() != kNumArchetypes) throw ContractError("bayes_update: need 4 likelihoods");
  if (!prior.valid(1e-6)) throw ContractError("bayes_update: invalid prior");
  ArchetypePosterior post;
  double total = 0.0;
  for (int y = 0; y < kNumArchetypes; ++y) {
    const auto yi = static_cast<size_t>(y);
    if (likelihoods[yi] < 0.0 || !std::isfinite(likelihoods[yi])) {
      throw ContractError("bayes_update: likelihoods must be finite and nonnegative");
    }
    post.probs[yi] = prior.probs[yi] * likelihoods[yi];
    total += post.probs[yi];
  }
  if (!(total > 0.0)) {
    throw EstimationError("bayes_update: numerically degenerate (all-zero) likelihoods");
  }
  for (double& p : post.probs) p /= total;
  return post;
}

ArchetypePosterior posterior_update(const ObservationModel& model, const ArchetypePosterior& prior,
                                    const SimObservation& obs) {
  const auto like = model.likelihood(obs);
  return bayes_update(prior, like);
}

// ---------------------------------------------------------------------------
// Hidden user state and stepping.
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<double, 3> kLatencyNone = {4.0, 8.0, 14.0};
constexpr std::array<double, 3> kLatencyTool = {12.0, 24.0, 45.0};

}  // namespace

UserStepResult user_step(SimUserState& state, const ActionPair& action,
                         std::vector<SimTask>& tasks, const SimConfig& cfg,
                         const ObservationModel& model, bool asked_explain_cue) {
  if (state.terminated()) throw ContractError("user_step: episode already terminated");
  ++state.turns_taken;

  UserStepResult r;
  r.obs.action = action;

  // Fixed draw count per step (outcome, rating x2, ask, latency, chars) so
  // rollout noise stays aligned across policies on paired seeds.
  const double u_outcome = state.rng.uniform01();
  if (action.tool == Tool::None) {
    r.obs.outcome = ToolOutcome::NotInvoked;
  } else {
    const double ps = cfg.tool_success[static_cast<size_t>(action.tool)];
    r.obs.outcome = u_outcome < ps ? ToolOutcome::Success : ToolOutcome::Failure;
    if (r.obs.outcome == ToolOutcome::Failure) {
      state.patience = std::max(0.0, state.patience - 0.1);
    }
    // A success completes the first pending task needing this tool.
    if (r.obs.outcome == ToolOutcome::Success) {
      for (SimTask& task : tasks) {
        if (!task.completed && needed_tool(task.kind) == action.tool) {
          task.completed = true;
          task.completed_turn = state.turns_taken;
          break;
        }
      }
    }
  }

  const double mean = model.rating_mean(state.archetype, action, r.obs.outcome);
  r.obs.rating = draw_clamped_rating(state.rng, mean, cfg.rating_sigma);
  state.satisfaction_sum += r.obs.rating;

  r.obs.next_asked_explain = state.rng.bernoulli(model.ask_prob(state.archetype, action.style));

  r.features.turn_index = state.turns_taken;
  r.features.user_asked_explain = asked_explain_cue;
  const bool tool_used = action.tool != Tool::None;
  const auto& support = tool_used ? kLatencyTool : kLatencyNone;
  r.features.latency_seconds = support[state.rng.uniform_int(support.size())];
  r.features.response_chars = action.style == Style::Concise
                                  ? static_cast<int>(300 + state.rng.uniform_int(500))
                                  : static_cast<int>(1200 + state.rng.uniform_int(1100));
  r.features.has_citation = action.tool == Tool::Search && r.obs.outcome == ToolOutcome::Success;
  r.features.has_structure = action.tool == Tool::Code && r.obs.outcome == ToolOutcome::Success;
  return r;
}

// ---------------------------------------------------------------------------
// Policies.
// ---------------------------------------------------------------------------

namespace {

struct PolicyContext {
  int turn = 1;
  int remaining_turns = 0;  // including the current one
  bool asked_explain = false;
  ToolOutcome prev_outcome = ToolOutcome::NotInvoked;
  const ArchetypePosterior& belief;
  const std::vector<SimTask>& tasks;
};

ActionPair heuristic_act(const PolicyContext& ctx) {
  const bool gate =
      ctx.turn <= 10 && ctx.prev_outcome != ToolOutcome::Failure;
  const Style style = ctx.asked_explain ? Style::Detailed : Style::Concise;
  if (!gate) return {Tool::None, style};
  return {ctx.asked_explain ? Tool::Search : Tool::Code, style};
}

ActionPair personalized_act(const PolicyContext& ctx, const SimConfig& cfg) {
  int pending = 0;
  const SimTask* next_task = nullptr;
  for (const SimTask& t : ctx.tasks) {
    if (!t.completed) {
      ++pending;
      if (next_task == nullptr) next_task = &t;
    }
  }

  const bool confident = ctx.belief.max_prob() >= cfg.confidence_threshold;
  const ArchetypeProfile& believed = archetype_profile(ctx.belief.argmax());
  const Style style = confident ? believed.preferred_style
                                : (ctx.asked_explain ? Style::Detailed : Style::Concise);
  if (next_task == nullptr) return {Tool::None, style};

  const Tool need = needed_tool(next_task->kind);
  // Deadline pressure: the horizon no longer allows waiting.
  const bool pressure = ctx.remaining_turns <= 2 * pending + 1;
  if (pressure) return {need, style};
  if (!confident) return {Tool::None, style};
  if (believed.wants_tool) return {need, style};
  // Believed tool-averse: pace invocations to every other turn.
  return ctx.turn % 2 == 0 ? ActionPair{need, style} : ActionPair{Tool::None, style};
}

ActionPair curiosity_act(const PolicyContext& ctx, const SimConfig& cfg,
                         const ObservationModel& model, const CuriositySchedule& schedule) {
  if (ctx.turn > schedule.horizon_k) return personalized_act(ctx, cfg);
  // Probe: maximize one-step expected information gain.
  double best_gain = -1.0;
  ActionPair best{Tool::None, Style::Concise};
  const double h_now = ctx.belief.entropy_bits();
  for (int j = 0; j < kNumJointActions; ++j) {
    const ActionPair action = ActionPair::from_joint_index(j);
    const double gain = h_now - model.expected_posterior_entropy(ctx.belief, action);
    if (gain > best_gain + 1e-12) {
      best_gain = gain;
      best = action;
    }
  }
  return best;
}

ActionPair policy_act(SimPolicyKind kind, const PolicyContext& ctx, const SimConfig& cfg,
                      const ObservationModel& model, const CuriositySchedule& schedule) {
  switch (kind) {
    case SimPolicyKind::Heuristic: return heuristic_act(ctx);
    case SimPolicyKind::Personalized: return personalized_act(ctx, cfg);
    case SimPolicyKind::PersCuriosity: return curiosity_act(ctx, cfg, model, schedule);
  }
  throw ContractError("invalid SimPolicyKind");
}

std::vector<double> episode_zscores(const std::vector<SimTurnRecord>& turns) {
  std::vector<double> z(turns.size(), 0.0);
  if (turns.empty()) return z;
  double mean = 0.0;
  for (const auto& t : turns) mean += t.rating;
  mean /= static_cast<double>(turns.size());
  double var = 0.0;
  for (const auto& t : turns) var += (t.rating - mean) * (t.rating - mean);
  var /= static_cast<double>(turns.size());
  const double sd = var > 1e-12 ? std::sqrt(var) : 1.0;
  for (size_t i = 0; i < turns.size(); ++i) z[i] = (turns[i].rating - mean) / sd;
  return z;
}

}  // namespace

// ---------------------------------------------------------------------------
// Episode runner.
// ---------------------------------------------------------------------------

EpisodeSetup sample_episode(const SimConfig& cfg, uint64_t seed, size_t episode_index) {
  if (cfg.max_turns < 1 || cfg.tasks_per_episode < 1) throw ContractError("bad sim config");
  Rng rng = Rng::substream(seed, "sim-setup", episode_index);
  EpisodeSetup setup;
  setup.archetype = static_cast<int>(rng.categorical(cfg.archetype_prior));
  for (int i = 0; i < cfg.tasks_per_episode; ++i) {
    SimTask task;
    // First task is always an analysis task; later ones mix in wellness
    // APIs so both kinds appear regularly.
    task.kind = i == 0                ? TaskKind::TimeseriesAnalysis
                : rng.bernoulli(0.5) ? TaskKind::WellnessApi
                                     : TaskKind::TimeseriesAnalysis;
    task.spec = task.kind == TaskKind::TimeseriesAnalysis
                    ? "rolling-window summary computed over the sampled health table"
                    : "reminder created with a valid ISO8601 timestamp";
    setup.tasks.push_back(std::move(task));
  }
  return setup;
}

EpisodeTrace run_episode(SimPolicyKind policy, const SimConfig& cfg,
                         const CuriositySchedule& schedule, uint64_t seed, size_t episode_index,
                         size_t rollout_index) {
  const EpisodeSetup setup = sample_episode(cfg, seed, episode_index);
  const ObservationModel model(cfg);

  EpisodeTrace trace;
  trace.seed = seed;
  trace.episode_index = episode_index;
  trace.archetype = setup.archetype;
  trace.tasks = setup.tasks;

  SimUserState state(setup.archetype, cfg.max_turns,
                     Rng::substream(seed, "sim-turns", episode_index * 16 + rollout_index));
  ArchetypePosterior belief = ArchetypePosterior::uniform();
  ToolOutcome prev_outcome = ToolOutcome::NotInvoked;
  bool asked = state.rng.bernoulli(model.ask_prob_first(setup.archetype));

  // Non-curiosity policies carry no intrinsic bonus in their return.
  const double lambda = policy == SimPolicyKind::PersCuriosity ? schedule.lambda : 0.0;
  const CuriositySchedule applied_schedule{lambda, schedule.horizon_k};

  for (int t = 1; t <= cfg.max_turns; ++t) {
    const PolicyContext ctx{t, cfg.max_turns - t + 1, asked, prev_outcome, belief, trace.tasks};
    const ActionPair action = policy_act(policy, ctx, cfg, model, schedule);

    const UserStepResult step = user_step(state, action, trace.tasks, cfg, model, asked);

    const ArchetypePosterior updated = posterior_update(model, belief, step.obs);
    SimTurnRecord rec;
    rec.turn = t;
    rec.action = action;
    rec.outcome = step.obs.outcome;
    rec.rating = step.obs.rating;
    rec.asked_explain = asked;
    rec.features = step.features;
    rec.posterior = updated;
    rec.curiosity_raw = curiosity_bonus(belief, updated);
    rec.curiosity_applied = applied_schedule.weight_at(t) * rec.curiosity_raw;
    const ArchetypeProfile& truth = archetype_profile(setup.archetype);
    rec.aligned = ((action.tool != Tool::None) == truth.wants_tool) &&
                  action.style == truth.preferred_style;
    trace.turns.push_back(rec);

    belief = updated;
    asked = step.obs.next_asked_explain;
    prev_outcome = step.obs.outcome;
  }

  // Terminal metrics, all recomputable from the per-turn records.
  trace.goal_success = std::all_of(trace.tasks.begin(), trace.tasks.end(),
                                   [](const SimTask& t) { return t.completed; });
  for (const SimTurnRecord& rec : trace.turns) {
    if (rec.posterior.max_prob() >= cfg.trait_id_threshold) {
      trace.trait_id_turn = rec.turn;
      break;
    }
  }
  trace.trait_correct = belief.argmax() == setup.archetype;

  size_t aligned = 0;
  for (const SimTurnRecord& rec : trace.turns) aligned += rec.aligned ? 1 : 0;
  trace.alignment_rate =
      trace.turns.empty() ? 0.0 : static_cast<double>(aligned) / static_cast<double>(trace.turns.size());

  const auto z = episode_zscores(trace.turns);
  double ret = 0.0, cur_total = 0.0;
  const WeightTriple weights =
      WeightTriple::for_literacy(archetype_literacy(setup.archetype));
  for (size_t i = 0; i < trace.turns.size(); ++i) {
    const SimTurnRecord& rec = trace.turns[i];
    RewardComponents comp;
    comp.r_user = z[i];
    comp.r_tool = tool_reward(rec.action.tool, rec.outcome);
    comp.r_eng = engagement_reward(rec.features, rec.action.tool);
    ret += total_signal(compose_reward(weights, comp), rec.turn, applied_schedule,
                        rec.curiosity_raw);
    cur_total += rec.curiosity_applied;
  }
  trace.final_return = ret;
  trace.curiosity_total = cur_total;
  return trace;
}

SimRunResult run_policy(SimPolicyKind policy, int n_episodes, const SimConfig& cfg,
                        const CuriositySchedule& schedule, uint64_t seed, int threads) {
  if (n_episodes < 1) throw ContractError("run_policy: n_episodes must be >= 1");
  if (cfg.pass_k < 1 || cfg.pass_k > 15) throw ContractError("run_policy: pass_k must be in [1,15]");

  SimRunResult result;
  result.traces.resize(static_cast<size_t>(n_episodes));
  std::vector<uint8_t> passed(static_cast<size_t>(n_episodes), 0);

  parallel_for(static_cast<size_t>(n_episodes), threads, [&](size_t e) {
    EpisodeTrace primary = run_episode(policy, cfg, schedule, seed, e, 0);
    bool any = primary.goal_success;
    for (int r = 1; r < cfg.pass_k && !any; ++r) {
      any = run_episode(policy, cfg, schedule, seed, e, static_cast<size_t>(r)).goal_success;
    }
    passed[e] = any ? 1 : 0;
    result.traces[e] = std::move(primary);
  });

  SimMetrics& m = result.metrics;
  m.episodes = static_cast<size_t>(n_episodes);
  const auto n = static_cast<double>(n_episodes);
  size_t identified = 0;
  for (size_t e = 0; e < result.traces.size(); ++e) {
    const EpisodeTrace& tr = result.traces[e];
    m.final_return += tr.final_return / n;
    m.goal_success += tr.goal_success ? 1.0 / n : 0.0;
    m.pass_at_3 += passed[e] != 0 ? 1.0 / n : 0.0;
    // Censoring convention: unidentified episodes count as max_turns + 1.
    m.trait_id_turn += (tr.trait_id_turn ? static_cast<double>(*tr.trait_id_turn)
                                         : static_cast<double>(cfg.max_turns + 1)) /
                       n;
    identified += tr.trait_id_turn.has_value() ? 1 : 0;
    m.trait_accuracy += tr.trait_correct ? 1.0 / n : 0.0;
    m.archetype_alignment += tr.alignment_rate / n;
  }
  m.trait_id_rate = static_cast<double>(identified) / n;
  return result;
}

bool verify_goal_success(const EpisodeTrace& trace, const SimConfig&) {
  std::vector<bool> done(trace.tasks.size(), false);
  for (const SimTurnRecord& rec : trace.turns) {
    if (rec.outcome != ToolOutcome::Success) continue;
    for (size_t i = 0; i < trace.tasks.size(); ++i) {
      if (!done[i] && needed_tool(trace.tasks[i].kind) == rec.action.tool) {
        done[i] = true;
        break;
      }
    }
  }
  return std::all_of(done.begin(), done.end(), [](bool b) { return b; });
}

double recompute_return(const EpisodeTrace& trace, const SimConfig& cfg,
                        const CuriositySchedule& schedule, SimPolicyKind policy) {
  const double lambda = policy == SimPolicyKind::PersCuriosity ? schedule.lambda : 0.0;
  const CuriositySchedule applied{lambda, schedule.horizon_k};
  const auto z = episode_zscores(trace.turns);
  const WeightTriple weights = WeightTriple::for_literacy(archetype_literacy(trace.archetype));

  double ret = 0.0;
  ArchetypePosterior prev = ArchetypePosterior::uniform();
  for (size_t i = 0; i < trace.turns.size(); ++i) {
    const SimTurnRecord& rec = trace.turns[i];
    RewardComponents comp;
    comp.r_user = z[i];
    comp.r_tool = tool_reward(rec.action.tool, rec.outcome);
    comp.r_eng = engagement_reward(rec.features, rec.action.tool);
    const double bonus = curiosity_bonus(prev, rec.posterior);
    ret += total_signal(compose_reward(weights, comp), rec.turn, applied, bonus);
    prev = rec.posterior;
  }
  return ret;
}

}  // namespace headope::sim

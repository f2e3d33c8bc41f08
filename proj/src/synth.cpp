#include "headope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "headope/rating_model.hpp"
#include "headope/rng.hpp"

namespace headope::synth {

using nlohmann::json;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Previous-outcome context states, in outcome_signal order.
constexpr std::array<double, 3> kPrevSignals = {-1.0, 0.0, 1.0};

struct SessionPlan {
  int user = 0;
  int archetype = 0;
  int n_turns = 0;
};

std::vector<int> user_archetypes(const SynthSpec& spec) {
  // Largest-remainder apportionment of users to archetypes.
  std::array<double, kNumArchetypes> mix = spec.archetype_mix;
  double total = 0.0;
  for (double m : mix) total += m;
  if (!(total > 0.0)) throw ContractError("synth: archetype_mix must have positive mass");
  std::array<int, kNumArchetypes> counts{};
  std::array<double, kNumArchetypes> remainder{};
  int assigned = 0;
  for (int a = 0; a < kNumArchetypes; ++a) {
    const double share = static_cast<double>(spec.n_users) * mix[static_cast<size_t>(a)] / total;
    counts[static_cast<size_t>(a)] = static_cast<int>(std::floor(share));
    remainder[static_cast<size_t>(a)] = share - std::floor(share);
    assigned += counts[static_cast<size_t>(a)];
  }
  while (assigned < spec.n_users) {
    int best = 0;
    for (int a = 1; a < kNumArchetypes; ++a) {
      if (remainder[static_cast<size_t>(a)] > remainder[static_cast<size_t>(best)]) best = a;
    }
    ++counts[static_cast<size_t>(best)];
    remainder[static_cast<size_t>(best)] = -1.0;
    ++assigned;
  }
  std::vector<int> archetypes;
  for (int a = 0; a < kNumArchetypes; ++a) {
    for (int i = 0; i < counts[static_cast<size_t>(a)]; ++i) archetypes.push_back(a);
  }
  return archetypes;
}

std::vector<SessionPlan> build_plan(const SynthSpec& spec) {
  if (spec.n_sessions < 1 || spec.n_users < 1) throw ContractError("synth: empty plan");
  const auto archetypes = user_archetypes(spec);
  std::vector<SessionPlan> plan(static_cast<size_t>(spec.n_sessions));
  for (int s = 0; s < spec.n_sessions; ++s) {
    auto& p = plan[static_cast<size_t>(s)];
    p.user = s % spec.n_users;
    p.archetype = archetypes[static_cast<size_t>(p.user)];
    p.n_turns = spec.turns_per_session;
  }
  if (spec.total_turns > 0) {
    const int base = spec.total_turns / spec.n_sessions;
    const int extra = spec.total_turns % spec.n_sessions;
    if (base < 1) throw ContractError("synth: total_turns too small for n_sessions");
    for (int s = 0; s < spec.n_sessions; ++s) {
      plan[static_cast<size_t>(s)].n_turns = base + (s < extra ? 1 : 0);
    }
  }
  return plan;
}

std::array<double, kNumTools> logging_tool_probs(const SynthSpec& spec, int turn, double prev,
                                                 bool ask) {
  const auto& lg = spec.logging;
  std::array<double, kNumTools> w = lg.tool_base;
  if (turn > lg.gate_turn_limit) w[0] *= lg.none_boost_gate_off;
  if (prev < -0.5) w[0] *= lg.none_boost_prev_fail;
  if (ask) w[1] *= lg.search_boost_ask;
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  return w;
}

double logging_detailed_prob(const SynthSpec& spec, bool ask, Literacy lit) {
  const auto& lg = spec.logging;
  double p = lg.style_base + (ask ? lg.style_ask_coef : 0.0) +
             (lit == Literacy::Low ? lg.style_low_lit_coef : 0.0);
  return std::clamp(p, 0.05, 0.95);
}

double missing_logit(const SynthSpec::Missingness& m, int arch, bool ask, double prev) {
  const double lit = archetype_literacy(arch) == Literacy::High ? 1.0 : 0.0;
  const double eff = archetype_efficacy(arch) == Efficacy::High ? 1.0 : 0.0;
  return m.intercept + m.lit_coef * lit + m.eff_coef * eff + m.ask_coef * (ask ? 1.0 : 0.0) +
         m.prev_coef * prev;
}

double mean_latency_penalty(const std::vector<double>& support) {
  if (support.empty()) throw ContractError("synth: empty latency support");
  double v = 0.0;
  for (double l : support) v += std::min(l / 30.0, 1.5);
  return -0.2 * v / static_cast<double>(support.size());
}

// Forward chain of the previous-outcome context under the logging policy:
// prev_dist[t-1][s] = P(prev state s at turn t | archetype).
std::vector<std::array<double, 3>> prev_chain(const SynthSpec& spec, int arch, int max_turns) {
  std::vector<std::array<double, 3>> dist(static_cast<size_t>(max_turns));
  dist[0] = {0.0, 1.0, 0.0};  // turn 1: nothing invoked yet
  const double ask_p = spec.ask_explain_prob[static_cast<size_t>(arch)];
  for (int t = 1; t < max_turns; ++t) {
    std::array<double, 3> next{};
    for (size_t s = 0; s < 3; ++s) {
      const double mass = dist[static_cast<size_t>(t - 1)][s];
      if (mass == 0.0) continue;
      for (int ask = 0; ask <= 1; ++ask) {
        const double pa = ask == 1 ? ask_p : 1.0 - ask_p;
        const auto tools = logging_tool_probs(spec, t, kPrevSignals[s], ask == 1);
        next[1] += mass * pa * tools[0];  // no tool -> NotInvoked
        for (int tool = 1; tool < kNumTools; ++tool) {
          const double ps =
              spec.tool_success[static_cast<size_t>(arch)][static_cast<size_t>(tool)];
          next[2] += mass * pa * tools[static_cast<size_t>(tool)] * ps;
          next[0] += mass * pa * tools[static_cast<size_t>(tool)] * (1.0 - ps);
        }
      }
    }
    dist[static_cast<size_t>(t)] = next;
  }
  return dist;
}

// Expected rewards for (archetype, action): exact means of what the
// generator emits.
struct CellRewards {
  double r_obj = 0.0;
  double r_user = 0.0;  // expected integer rating
};

CellRewards cell_rewards(const SynthSpec& spec, int arch, const ActionPair& action) {
  CellRewards out;
  const auto j = static_cast<size_t>(action.joint_index());
  const double mean = spec.rating_mean[static_cast<size_t>(arch)][j];
  if (action.tool == Tool::None) {
    out.r_obj = mean_latency_penalty(spec.latency_none);
    out.r_user = clamped_rating_mean(mean, spec.rating_sigma);
    return out;
  }
  const double ps =
      spec.tool_success[static_cast<size_t>(arch)][static_cast<size_t>(action.tool)];
  double r_eng = mean_latency_penalty(spec.latency_tool);
  if (action.tool == Tool::Search) r_eng += 0.2 * ps;  // citation present on success
  if (action.tool == Tool::Code) r_eng += 0.2 * ps;    // structure present on success
  out.r_obj = (2.0 * ps - 1.0) + r_eng;
  out.r_user = ps * clamped_rating_mean(mean, spec.rating_sigma) +
               (1.0 - ps) * clamped_rating_mean(mean - spec.failure_penalty, spec.rating_sigma);
  return out;
}

FeatureVector cell_features(int arch, int turn, double prev, bool ask) {
  FeatureVector x;
  x.turn_index = static_cast<double>(turn);
  x.user_asked_explain = ask ? 1.0 : 0.0;
  x.literacy_high = archetype_literacy(arch) == Literacy::High ? 1.0 : 0.0;
  x.efficacy_high = archetype_efficacy(arch) == Efficacy::High ? 1.0 : 0.0;
  x.prev_outcome = prev;
  return x;
}

double solve_missing_intercept(const SynthSpec& spec, const std::vector<SessionPlan>& plan) {
  int max_turns = 0;
  for (const auto& p : plan) max_turns = std::max(max_turns, p.n_turns);
  std::array<std::vector<std::array<double, 3>>, kNumArchetypes> chains;
  for (int a = 0; a < kNumArchetypes; ++a) chains[static_cast<size_t>(a)] = prev_chain(spec, a, max_turns);

  auto rate_for = [&](double intercept) {
    SynthSpec::Missingness m = spec.missing;
    m.intercept = intercept;
    double num = 0.0, den = 0.0;
    for (const auto& p : plan) {
      const double ask_p = spec.ask_explain_prob[static_cast<size_t>(p.archetype)];
      for (int t = 1; t <= p.n_turns; ++t) {
        const auto& prev_dist = chains[static_cast<size_t>(p.archetype)][static_cast<size_t>(t - 1)];
        for (size_t s = 0; s < 3; ++s) {
          for (int ask = 0; ask <= 1; ++ask) {
            const double w = prev_dist[s] * (ask == 1 ? ask_p : 1.0 - ask_p);
            num += w * sigmoid(missing_logit(m, p.archetype, ask == 1, kPrevSignals[s]));
            den += w;
          }
        }
      }
    }
    return num / den;
  };

  double lo = -10.0, hi = 10.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = (lo + hi) / 2.0;
    if (rate_for(mid) < spec.missing.target_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return (lo + hi) / 2.0;
}

}  // namespace

void SynthSpec::build_rating_means(const std::array<double, kNumArchetypes>& base,
                                   const std::array<double, kNumArchetypes>& tool_effect,
                                   double style_bonus,
                                   const std::array<Style, kNumArchetypes>& pref_style) {
  for (int a = 0; a < kNumArchetypes; ++a) {
    for (int j = 0; j < kNumJointActions; ++j) {
      const ActionPair action = ActionPair::from_joint_index(j);
      double m = base[static_cast<size_t>(a)];
      if (action.tool != Tool::None) m += tool_effect[static_cast<size_t>(a)];
      if (action.style == pref_style[static_cast<size_t>(a)]) m += style_bonus;
      rating_mean[static_cast<size_t>(a)][static_cast<size_t>(j)] = m;
    }
  }
}

namespace {

void fill_uniform_success(SynthSpec& spec, double search, double code, double email) {
  for (int a = 0; a < kNumArchetypes; ++a) {
    spec.tool_success[static_cast<size_t>(a)] = {0.0, search, code, email};
  }
}

constexpr std::array<Style, kNumArchetypes> kPreferredStyles = {Style::Concise, Style::Detailed,
                                                                Style::Detailed, Style::Concise};

}  // namespace

SynthSpec SynthSpec::pilot_like() {
  SynthSpec spec;
  spec.name = "pilot_like";
  spec.n_sessions = 23;
  spec.n_users = 7;
  spec.total_turns = 350;
  spec.rating_sigma = 0.7;
  fill_uniform_success(spec, 0.816, 0.807, 0.857);
  spec.build_rating_means({4.1, 3.9, 3.7, 4.0}, {0.2, 0.5, -0.3, -0.8}, 0.3, kPreferredStyles);
  spec.missing.enabled = true;
  spec.missing.target_rate = 0.80;
  return spec;
}

SynthSpec SynthSpec::estimator_bench() {
  SynthSpec spec;
  spec.name = "estimator_bench";
  spec.n_sessions = 3600;
  spec.n_users = 120;
  spec.turns_per_session = 14;
  spec.rating_sigma = 0.7;
  fill_uniform_success(spec, 0.816, 0.807, 0.857);
  spec.build_rating_means({4.1, 3.9, 3.7, 4.0}, {0.2, 0.5, -0.3, -0.8}, 0.3, kPreferredStyles);
  spec.missing.enabled = false;
  return spec;
}

SynthSpec SynthSpec::selection_bench() {
  SynthSpec spec;
  spec.name = "selection_bench";
  spec.n_sessions = 1500;
  spec.n_users = 60;
  spec.turns_per_session = 14;
  spec.rating_sigma = 0.7;
  fill_uniform_success(spec, 0.816, 0.807, 0.857);
  spec.build_rating_means({4.3, 3.6, 3.4, 4.2}, {0.3, 0.7, -0.5, -1.2}, 0.3, kPreferredStyles);
  spec.missing.enabled = true;
  spec.missing.lit_coef = 1.3;
  spec.missing.eff_coef = -1.1;
  spec.missing.ask_coef = 0.5;
  spec.missing.prev_coef = 0.4;
  spec.missing.target_rate = 0.75;
  return spec;
}

SynthSpec SynthSpec::subgroup_harm() {
  SynthSpec spec;
  spec.name = "subgroup_harm";
  spec.n_sessions = 1500;
  spec.n_users = 60;
  spec.turns_per_session = 14;
  spec.rating_sigma = 0.7;
  // Tool reward by archetype via success rates: high literacy +0.6,
  // low-lit/low-eff +0.1, low-lit/high-eff -0.4.
  spec.tool_success = {{
      {0.0, 0.80, 0.80, 0.80},  // L_high x E_high
      {0.0, 0.80, 0.80, 0.80},  // L_high x E_low
      {0.0, 0.55, 0.55, 0.55},  // L_low x E_low
      {0.0, 0.30, 0.30, 0.30},  // L_low x E_high
  }};
  spec.build_rating_means({4.1, 3.7, 3.8, 4.2}, {-0.15, 0.6, -0.5, -1.3}, 0.3, kPreferredStyles);
  spec.missing.enabled = false;
  return spec;
}

SynthResult generate(const SynthSpec& spec_in, uint64_t seed) {
  SynthSpec spec = spec_in;
  const auto plan = build_plan(spec);
  if (spec.missing.enabled && spec.missing.target_rate > 0.0) {
    spec.missing.intercept = solve_missing_intercept(spec, plan);
  }

  SynthResult result;
  result.truth.oracle_props.floor_eps = 0.01;

  // Zero-padded ids so generation order survives parse_log's sort.
  auto padded = [](const char* prefix, size_t i) {
    std::string n = std::to_string(i);
    return std::string(prefix) + std::string(n.size() < 5 ? 5 - n.size() : 0, '0') + n;
  };

  for (size_t si = 0; si < plan.size(); ++si) {
    const SessionPlan& p = plan[si];
    Session session;
    session.session_id = padded("synth-s", si + 1);
    session.user.user_id = padded("user-", static_cast<size_t>(p.user) + 1);
    session.user.literacy = archetype_literacy(p.archetype);
    session.user.efficacy = archetype_efficacy(p.archetype);

    Rng rng = Rng::substream(seed, "synth-session", si);
    double prev = 0.0;
    for (int t = 1; t <= p.n_turns; ++t) {
      LoggedTurn turn;
      turn.session_id = session.session_id;
      turn.features.turn_index = t;

      const bool ask = rng.bernoulli(spec.ask_explain_prob[static_cast<size_t>(p.archetype)]);
      turn.features.user_asked_explain = ask;

      const auto tool_probs = logging_tool_probs(spec, t, prev, ask);
      const auto tool = static_cast<Tool>(rng.categorical(tool_probs));
      const double p_detailed = logging_detailed_prob(spec, ask, session.user.literacy);
      const Style style = rng.bernoulli(p_detailed) ? Style::Detailed : Style::Concise;
      turn.action = {tool, style};

      result.truth.oracle_props.tool.push_back(tool_probs);
      result.truth.oracle_props.style.push_back({1.0 - p_detailed, p_detailed});

      double rating_mean =
          spec.rating_mean[static_cast<size_t>(p.archetype)][static_cast<size_t>(turn.action.joint_index())];
      if (tool == Tool::None) {
        turn.outcome = ToolOutcome::NotInvoked;
        turn.features.latency_seconds =
            spec.latency_none[static_cast<size_t>(rng.uniform_int(spec.latency_none.size()))];
      } else {
        const double ps =
            spec.tool_success[static_cast<size_t>(p.archetype)][static_cast<size_t>(tool)];
        const bool success = rng.bernoulli(ps);
        turn.outcome = success ? ToolOutcome::Success : ToolOutcome::Failure;
        if (!success) rating_mean -= spec.failure_penalty;
        turn.features.latency_seconds =
            spec.latency_tool[static_cast<size_t>(rng.uniform_int(spec.latency_tool.size()))];
        turn.features.has_citation = tool == Tool::Search && success;
        turn.features.has_structure = tool == Tool::Code && success;
      }
      turn.features.response_chars =
          style == Style::Concise ? static_cast<int>(300 + rng.uniform_int(500))
                                  : static_cast<int>(1200 + rng.uniform_int(1100));

      const int rating = draw_clamped_rating(rng, rating_mean, spec.rating_sigma);
      double p_rate = 1.0;
      if (spec.missing.enabled) {
        p_rate = sigmoid(missing_logit(spec.missing, p.archetype, ask, prev));
      }
      result.truth.oracle_p_rate.push_back(p_rate);
      if (!spec.missing.enabled || rng.bernoulli(p_rate)) turn.rating = rating;

      prev = outcome_signal(turn.outcome);
      session.turns.push_back(std::move(turn));
    }
    result.sessions.push_back(std::move(session));
  }

  if (spec.missing.enabled) {
    std::vector<int> rated;
    for (const Session& s : result.sessions) {
      for (const LoggedTurn& t : s.turns) rated.push_back(t.rated() ? 1 : 0);
    }
    const size_t pos = static_cast<size_t>(std::count(rated.begin(), rated.end(), 1));
    if (pos > 0 && pos < rated.size()) {
      result.truth.oracle_rating_auc = auc(result.truth.oracle_p_rate, rated);
      result.truth.oracle_rating_auc_defined = true;
    }
  }

  // Analytic values for the four named policies as constructed on this log.
  const LogPolicyStats stats = LogPolicyStats::from_sessions(result.sessions);
  for (PolicyKind kind : {PolicyKind::NoTool, PolicyKind::AlwaysTool, PolicyKind::HeuristicGated,
                          PolicyKind::PersonalizedWeights}) {
    const auto policy = make_policy(PolicySpec::named(kind), stats);
    result.truth.policies.push_back(analytic_policy_value(spec, *policy, result.sessions));
  }
  return result;
}

PolicyValues analytic_policy_value(const SynthSpec& spec_in, const Policy& policy,
                                   std::span<const Session> sessions) {
  SynthSpec spec = spec_in;
  // Turn weights per (archetype, t) from the actual session lengths.
  int max_turns = 0;
  std::array<std::vector<double>, kNumArchetypes> weight;  // [arch][t-1] = #sessions alive
  for (const Session& s : sessions) {
    max_turns = std::max(max_turns, static_cast<int>(s.turns.size()));
  }
  for (auto& w : weight) w.assign(static_cast<size_t>(max_turns), 0.0);
  double total_turns_count = 0.0;
  for (const Session& s : sessions) {
    const int arch = s.user.archetype();
    for (size_t t = 0; t < s.turns.size(); ++t) weight[static_cast<size_t>(arch)][t] += 1.0;
    total_turns_count += static_cast<double>(s.turns.size());
  }

  PolicyValues out;
  out.policy = policy.name();
  std::array<double, kNumArchetypes> arch_turns{};
  std::array<double, kNumArchetypes> obj_sum{}, user_sum{}, total_sum{};

  for (int arch = 0; arch < kNumArchetypes; ++arch) {
    double arch_total = 0.0;
    for (double w : weight[static_cast<size_t>(arch)]) arch_total += w;
    if (arch_total == 0.0) continue;
    out.arch_present[static_cast<size_t>(arch)] = true;
    arch_turns[static_cast<size_t>(arch)] = arch_total;

    const auto chain = prev_chain(spec, arch, max_turns);
    const double ask_p = spec.ask_explain_prob[static_cast<size_t>(arch)];
    const WeightTriple wt = WeightTriple::for_literacy(archetype_literacy(arch));

    for (int t = 1; t <= max_turns; ++t) {
      const double w_t = weight[static_cast<size_t>(arch)][static_cast<size_t>(t - 1)];
      if (w_t == 0.0) continue;
      for (size_t s = 0; s < 3; ++s) {
        const double p_prev = chain[static_cast<size_t>(t - 1)][s];
        if (p_prev == 0.0) continue;
        for (int ask = 0; ask <= 1; ++ask) {
          const double cell_w = w_t * p_prev * (ask == 1 ? ask_p : 1.0 - ask_p);
          if (cell_w == 0.0) continue;
          const FeatureVector x = cell_features(arch, t, kPrevSignals[s], ask == 1);
          const HeadProbs probs = policy.ratio_probs(x);
          double v_obj = 0.0, v_user = 0.0, v_total = 0.0;
          for (int j = 0; j < kNumJointActions; ++j) {
            const ActionPair action = ActionPair::from_joint_index(j);
            const double pa = probs.joint(action);
            if (pa == 0.0) continue;
            const CellRewards r = cell_rewards(spec, arch, action);
            v_obj += pa * r.r_obj;
            v_user += pa * r.r_user;
            const double r_tool_mean =
                action.tool == Tool::None
                    ? 0.0
                    : 2.0 * spec.tool_success[static_cast<size_t>(arch)]
                                             [static_cast<size_t>(action.tool)] -
                          1.0;
            const double r_eng_mean = r.r_obj - r_tool_mean;
            v_total += pa * (wt.beta * r_tool_mean + wt.gamma * r_eng_mean + wt.alpha * r.r_user);
          }
          obj_sum[static_cast<size_t>(arch)] += cell_w * v_obj;
          user_sum[static_cast<size_t>(arch)] += cell_w * v_user;
          total_sum[static_cast<size_t>(arch)] += cell_w * v_total;
        }
      }
    }
  }

  double obj = 0.0, user = 0.0, total = 0.0;
  for (int arch = 0; arch < kNumArchetypes; ++arch) {
    const auto a = static_cast<size_t>(arch);
    if (!out.arch_present[a]) continue;
    out.v_obj_by_arch[a] = obj_sum[a] / arch_turns[a];
    out.v_user_by_arch[a] = user_sum[a] / arch_turns[a];
    obj += obj_sum[a];
    user += user_sum[a];
    total += total_sum[a];
  }
  out.v_obj = obj / total_turns_count;
  out.v_user = user / total_turns_count;
  out.v_total = total / total_turns_count;
  return out;
}

// ---------------------------------------------------------------------------
// JSON round trip.
// ---------------------------------------------------------------------------

std::string SynthSpec::to_json() const {
  json j;
  j["name"] = name;
  j["n_sessions"] = n_sessions;
  j["n_users"] = n_users;
  j["turns_per_session"] = turns_per_session;
  j["total_turns"] = total_turns;
  j["archetype_mix"] = archetype_mix;
  j["rating_sigma"] = rating_sigma;
  j["failure_penalty"] = failure_penalty;
  j["rating_mean"] = rating_mean;
  j["tool_success"] = tool_success;
  j["ask_explain_prob"] = ask_explain_prob;
  j["logging"] = {{"tool_base", logging.tool_base},
                  {"none_boost_gate_off", logging.none_boost_gate_off},
                  {"none_boost_prev_fail", logging.none_boost_prev_fail},
                  {"search_boost_ask", logging.search_boost_ask},
                  {"gate_turn_limit", logging.gate_turn_limit},
                  {"style_base", logging.style_base},
                  {"style_ask_coef", logging.style_ask_coef},
                  {"style_low_lit_coef", logging.style_low_lit_coef}};
  j["missing"] = {{"enabled", missing.enabled},       {"intercept", missing.intercept},
                  {"lit_coef", missing.lit_coef},     {"eff_coef", missing.eff_coef},
                  {"ask_coef", missing.ask_coef},     {"prev_coef", missing.prev_coef},
                  {"target_rate", missing.target_rate}};
  j["latency_none"] = latency_none;
  j["latency_tool"] = latency_tool;
  return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError("synth spec: malformed JSON");

  // Named presets can be requested via {"name": "..."} alone; custom specs
  // start from sane reward tables and override what they list.
  SynthSpec spec;
  fill_uniform_success(spec, 0.816, 0.807, 0.857);
  spec.build_rating_means({4.1, 3.9, 3.7, 4.0}, {0.2, 0.5, -0.3, -0.8}, 0.3, kPreferredStyles);
  const std::string name = j.value("name", std::string("custom"));
  if (name == "pilot_like") spec = pilot_like();
  else if (name == "estimator_bench") spec = estimator_bench();
  else if (name == "selection_bench") spec = selection_bench();
  else if (name == "subgroup_harm") spec = subgroup_harm();
  spec.name = name;

  try {
    if (j.contains("n_sessions")) spec.n_sessions = j["n_sessions"].get<int>();
    if (j.contains("n_users")) spec.n_users = j["n_users"].get<int>();
    if (j.contains("turns_per_session")) spec.turns_per_session = j["turns_per_session"].get<int>();
    if (j.contains("total_turns")) spec.total_turns = j["total_turns"].get<int>();
    if (j.contains("archetype_mix")) spec.archetype_mix = j["archetype_mix"];
    if (j.contains("rating_sigma")) spec.rating_sigma = j["rating_sigma"].get<double>();
    if (j.contains("failure_penalty")) spec.failure_penalty = j["failure_penalty"].get<double>();
    if (j.contains("rating_mean")) spec.rating_mean = j["rating_mean"];
    if (j.contains("tool_success")) spec.tool_success = j["tool_success"];
    if (j.contains("ask_explain_prob")) spec.ask_explain_prob = j["ask_explain_prob"];
    if (j.contains("logging")) {
      const json& lg = j["logging"];
      if (lg.contains("tool_base")) spec.logging.tool_base = lg["tool_base"];
      spec.logging.none_boost_gate_off =
          lg.value("none_boost_gate_off", spec.logging.none_boost_gate_off);
      spec.logging.none_boost_prev_fail =
          lg.value("none_boost_prev_fail", spec.logging.none_boost_prev_fail);
      spec.logging.search_boost_ask = lg.value("search_boost_ask", spec.logging.search_boost_ask);
      spec.logging.gate_turn_limit = lg.value("gate_turn_limit", spec.logging.gate_turn_limit);
      spec.logging.style_base = lg.value("style_base", spec.logging.style_base);
      spec.logging.style_ask_coef = lg.value("style_ask_coef", spec.logging.style_ask_coef);
      spec.logging.style_low_lit_coef =
          lg.value("style_low_lit_coef", spec.logging.style_low_lit_coef);
    }
    if (j.contains("missing")) {
      const json& m = j["missing"];
      spec.missing.enabled = m.value("enabled", spec.missing.enabled);
      spec.missing.intercept = m.value("intercept", spec.missing.intercept);
      spec.missing.lit_coef = m.value("lit_coef", spec.missing.lit_coef);
      spec.missing.eff_coef = m.value("eff_coef", spec.missing.eff_coef);
      spec.missing.ask_coef = m.value("ask_coef", spec.missing.ask_coef);
      spec.missing.prev_coef = m.value("prev_coef", spec.missing.prev_coef);
      spec.missing.target_rate = m.value("target_rate", spec.missing.target_rate);
    }
    if (j.contains("latency_none")) spec.latency_none = j["latency_none"].get<std::vector<double>>();
    if (j.contains("latency_tool")) spec.latency_tool = j["latency_tool"].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("synth spec: ") + e.what());
  }
  return spec;
}

}  // namespace headope::synth

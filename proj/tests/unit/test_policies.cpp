#include <doctest.h>

#include <cmath>

#include "headope/ope.hpp"
#include "headope/policies.hpp"
#include "headope/rng.hpp"
#include "headope/synth.hpp"

using namespace headope;

namespace {

FeatureVector context(int turn = 2, bool ask = false, double prev = 0.0, bool lit_high = true) {
  FeatureVector x;
  x.turn_index = turn;
  x.user_asked_explain = ask ? 1.0 : 0.0;
  x.prev_outcome = prev;
  x.literacy_high = lit_high ? 1.0 : 0.0;
  return x;
}

std::vector<Session> tool_share_log() {
  // 20 tool-invoking turns: 11 search, 8 code, 1 email -> .55/.40/.05.
  std::vector<Session> sessions;
  Session s;
  s.session_id = "s1";
  s.user = {"u1", Literacy::High, Efficacy::Low};
  int t = 1;
  auto add = [&](Tool tool) {
    LoggedTurn turn;
    turn.session_id = s.session_id;
    turn.features.turn_index = t++;
    turn.action.tool = tool;
    turn.outcome = tool == Tool::None ? ToolOutcome::NotInvoked : ToolOutcome::Success;
    s.turns.push_back(turn);
  };
  for (int i = 0; i < 11; ++i) add(Tool::Search);
  for (int i = 0; i < 8; ++i) add(Tool::Code);
  add(Tool::Email);
  for (int i = 0; i < 5; ++i) add(Tool::None);
  sessions.push_back(s);
  return sessions;
}

void check_simplex(const HeadProbs& p) {
  double ts = 0.0, ss = 0.0;
  for (double v : p.tool) {
    CHECK(v >= 0.0);
    ts += v;
  }
  for (double v : p.style) {
    CHECK(v >= 0.0);
    ss += v;
  }
  CHECK(ts == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ss == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("NoTool policy") {
  const auto policy = make_policy(PolicySpec::named(PolicyKind::NoTool), {});
  const auto p = policy->probs(context());
  CHECK(p.tool[0] == 1.0);
  CHECK(p.tool[1] + p.tool[2] + p.tool[3] == 0.0);
  // Ratio form keeps the tool head unsmoothed: zero on tools by design.
  const auto rp = policy->ratio_probs(context());
  CHECK(rp.tool[0] == 1.0);
  CHECK(rp.tool[1] == 0.0);
  check_simplex(rp);
}

TEST_CASE("AlwaysTool uses the logged tool conditional and zeroes None") {
  const auto stats = LogPolicyStats::from_sessions(tool_share_log());
  CHECK_FALSE(stats.conditional_degenerate);
  const auto policy = make_policy(PolicySpec::named(PolicyKind::AlwaysTool), stats);
  const auto p = policy->probs(context());
  CHECK(p.tool[0] == 0.0);
  CHECK(p.tool[1] == doctest::Approx(0.55));
  CHECK(p.tool[2] == doctest::Approx(0.40));
  CHECK(p.tool[3] == doctest::Approx(0.05));
  const auto rp = policy->ratio_probs(context());
  CHECK(rp.tool[0] == 0.0);  // the None zero survives smoothing
  check_simplex(rp);
}

TEST_CASE("HeuristicGated style follows the explain rule exactly") {
  const auto policy = make_policy(PolicySpec::named(PolicyKind::HeuristicGated), {});
  CHECK(policy->probs(context(2, true)).style[1] == 1.0);
  CHECK(policy->probs(context(2, false)).style[0] == 1.0);
}

TEST_CASE("HeuristicGated gate rules") {
  const auto policy = make_policy(PolicySpec::named(PolicyKind::HeuristicGated), {});
  // Gate open, no explain cue: Code.
  CHECK(policy->probs(context(2, false)).tool[2] == 1.0);
  // Gate open, explain cue: Search.
  CHECK(policy->probs(context(2, true)).tool[1] == 1.0);
  // Past the window: None.
  CHECK(policy->probs(context(11, false)).tool[0] == 1.0);
  // Right after a failure: None.
  CHECK(policy->probs(context(3, false, -1.0)).tool[0] == 1.0);
}

TEST_CASE("PersonalizedWeights shifts the gate by literacy") {
  const auto policy = make_policy(PolicySpec::named(PolicyKind::PersonalizedWeights), {});
  // Gate off, high literacy: still a 0.2 chance of the gated tool.
  const auto off_high = policy->probs(context(12, false, 0.0, true));
  CHECK(off_high.tool[0] == doctest::Approx(0.8));
  CHECK(off_high.tool[2] == doctest::Approx(0.2));
  // Gate on, low literacy: tool probability reduced to 0.8.
  const auto on_low = policy->probs(context(2, false, 0.0, false));
  CHECK(on_low.tool[0] == doctest::Approx(0.2));
  CHECK(on_low.tool[2] == doctest::Approx(0.8));
  // Gate on, high literacy: certain tool.
  CHECK(policy->probs(context(2, false, 0.0, true)).tool[2] == doctest::Approx(1.0));
}

TEST_CASE("custom table policy parses and matches rows in order") {
  PolicySpec spec = PolicySpec::named(PolicyKind::Custom);
  spec.custom_config_json = R"({
    "tool": [
      {"when": {"user_asked_explain": true}, "probs": {"none": 0.2, "search": 0.8}},
      {"probs": {"none": 0.7, "code": 0.3}}
    ],
    "style": [
      {"when": {"literacy_high": false}, "probs": {"detailed": 1.0}},
      {"probs": {"concise": 0.6, "detailed": 0.4}}
    ]
  })";
  const auto policy = make_policy(spec, {});
  const auto asked = policy->probs(context(2, true));
  CHECK(asked.tool[1] == doctest::Approx(0.8));
  const auto quiet = policy->probs(context(2, false));
  CHECK(quiet.tool[0] == doctest::Approx(0.7));
  CHECK(policy->probs(context(2, false, 0.0, false)).style[1] == 1.0);
  check_simplex(policy->ratio_probs(context(5, true)));

  PolicySpec bad = spec;
  bad.custom_config_json = R"({"tool": [{"probs": {"none": 0.4}}], "style": [{"probs": {"concise": 1.0}}]})";
  CHECK_THROWS_AS(make_policy(bad, {}), UsageError);
}

TEST_CASE("importance ratio worked values") {
  HeadProbs target;
  target.tool = {0.25, 0.25, 0.25, 0.25};
  target.style = {0.5, 0.5};
  const ActionPair logged{Tool::Search, Style::Concise};

  SUBCASE("equal probabilities give ratio 1") {
    const auto r = importance_ratio(target, {0.25, 0.25, 0.25, 0.25}, {0.5, 0.5}, logged, 50.0, 0.01);
    CHECK(r.raw == doctest::Approx(1.0));
    CHECK_FALSE(r.clip_hit);
  }
  SUBCASE("hand product 0.8/0.2 with equal styles") {
    HeadProbs t2 = target;
    t2.tool = {0.1, 0.8, 0.05, 0.05};
    const auto r = importance_ratio(t2, {0.4, 0.2, 0.2, 0.2}, {0.5, 0.5}, logged, 50.0, 0.01);
    CHECK(r.raw == doctest::Approx(4.0));
  }
  SUBCASE("clipping at c") {
    const auto r = ImportanceRatio::from_raw(120.0, 50.0);
    CHECK(r.clipped == 50.0);
    CHECK(r.clip_hit);
    // Idempotent.
    const auto r2 = ImportanceRatio::from_raw(r.clipped, 50.0);
    CHECK(r2.clipped == 50.0);
    CHECK_FALSE(r2.clip_hit);
  }
  SUBCASE("behavior propensity below floor is a contract error") {
    CHECK_THROWS_AS(importance_ratio(target, {0.97, 0.001, 0.019, 0.01}, {0.5, 0.5},
                                     ActionPair{Tool::Search, Style::Concise}, 50.0, 0.01),
                    ContractError);
  }
}

TEST_CASE("NoTool has zero raw ratio on every tool-invoking turn") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 3u);
  const auto data = EvalDataset::build(result.sessions, UserRewardScale::Raw);
  const auto policy = make_policy(PolicySpec::named(PolicyKind::NoTool), {});
  const auto ratios = compute_ratios(*policy, data, result.truth.oracle_props, 50.0);
  for (size_t i = 0; i < data.n_turns(); ++i) {
    if (data.turns[i].action.tool != Tool::None) {
      CHECK(ratios[i].raw == 0.0);
    } else {
      CHECK(ratios[i].raw > 0.0);
    }
  }
}

TEST_CASE("behavior mirror gives ratio exactly 1 on every turn") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 9u);
  EvalOptions opt;
  opt.n_boot = 100;
  const EvalContext ctx = EvalContext::fit(result.sessions, opt);
  const BehaviorMirrorPolicy mirror(&*ctx.tool_model, &*ctx.style_model);
  const auto ratios = compute_ratios(mirror, ctx.data, ctx.props, 50.0);
  for (const auto& r : ratios) CHECK(r.raw == 1.0);
}

TEST_CASE("ratio-form head probabilities always sum to one") {
  Rng rng(55);
  const auto stats = LogPolicyStats::from_sessions(tool_share_log());
  for (PolicyKind kind : {PolicyKind::NoTool, PolicyKind::AlwaysTool, PolicyKind::HeuristicGated,
                          PolicyKind::PersonalizedWeights}) {
    const auto policy = make_policy(PolicySpec::named(kind), stats);
    for (int i = 0; i < 200; ++i) {
      const auto x = context(1 + static_cast<int>(rng.uniform_int(15)), rng.bernoulli(0.5),
                             static_cast<double>(rng.uniform_int(3)) - 1.0, rng.bernoulli(0.5));
      check_simplex(policy->ratio_probs(x));
      check_simplex(policy->probs(x));
    }
  }
}

#include <doctest.h>

#include <cmath>

#include "headope/ope.hpp"
#include "headope/rating_model.hpp"
#include "headope/rng.hpp"
#include "headope/synth.hpp"

using namespace headope;
using synth::SynthSpec;

namespace {

// Estimator-free Monte-Carlo oracle for the analytic policy value: visit
// every logged context (the log realizes the logging-policy context
// distribution), draw target actions and realize reward samples from the
// spec's primitive draws. Independent of the forward-recursion code path.
struct McValue {
  double v_obj = 0.0;
  double v_user = 0.0;
};

McValue mc_policy_value(const SynthSpec& spec, const Policy& policy,
                        std::span<const Session> sessions, int replicates, uint64_t seed) {
  Rng rng(seed);
  McValue out;
  size_t count = 0;
  for (const Session& session : sessions) {
    const int arch = session.user.archetype();
    ToolOutcome prev = ToolOutcome::NotInvoked;
    for (const LoggedTurn& logged : session.turns) {
      const FeatureVector x = featurize(session.user, logged.features, prev);
      const HeadProbs probs = policy.ratio_probs(x);
      for (int rep = 0; rep < replicates; ++rep) {
        const auto tool = static_cast<Tool>(rng.categorical(probs.tool));
        const auto style = rng.bernoulli(probs.style[1]) ? Style::Detailed : Style::Concise;
        const ActionPair action{tool, style};
        double mean =
            spec.rating_mean[static_cast<size_t>(arch)][static_cast<size_t>(action.joint_index())];
        double r_obj = 0.0;
        if (tool == Tool::None) {
          const double latency = spec.latency_none[rng.uniform_int(spec.latency_none.size())];
          r_obj = -0.2 * std::min(latency / 30.0, 1.5);
        } else {
          const double ps =
              spec.tool_success[static_cast<size_t>(arch)][static_cast<size_t>(tool)];
          const bool success = rng.bernoulli(ps);
          if (!success) mean -= spec.failure_penalty;
          const double latency = spec.latency_tool[rng.uniform_int(spec.latency_tool.size())];
          r_obj = (success ? 1.0 : -1.0) - 0.2 * std::min(latency / 30.0, 1.5);
          if (success && (tool == Tool::Search || tool == Tool::Code)) r_obj += 0.2;
        }
        out.v_obj += r_obj;
        out.v_user += draw_clamped_rating(rng, mean, spec.rating_sigma);
        ++count;
      }
      prev = logged.outcome;
    }
  }
  out.v_obj /= static_cast<double>(count);
  out.v_user /= static_cast<double>(count);
  return out;
}

}  // namespace

TEST_CASE("analytic policy values agree with an estimator-free Monte-Carlo oracle") {
  SynthSpec spec = SynthSpec::estimator_bench();
  spec.n_sessions = 1200;
  spec.n_users = 60;
  const auto result = synth::generate(spec, 91u);
  const LogPolicyStats stats = LogPolicyStats::from_sessions(result.sessions);
  for (PolicyKind kind : {PolicyKind::NoTool, PolicyKind::AlwaysTool, PolicyKind::HeuristicGated,
                          PolicyKind::PersonalizedWeights}) {
    const auto policy = make_policy(PolicySpec::named(kind), stats);
    const auto analytic = synth::analytic_policy_value(spec, *policy, result.sessions);
    const McValue mc = mc_policy_value(spec, *policy, result.sessions, 20, 1234u);
    CHECK(std::abs(analytic.v_obj - mc.v_obj) <= 0.025);
    CHECK(std::abs(analytic.v_user - mc.v_user) <= 0.025);
  }
}

TEST_CASE("synthetic generation is byte-deterministic in the seed") {
  const SynthSpec spec = SynthSpec::pilot_like();
  const auto a = synth::generate(spec, 424242u);
  const auto b = synth::generate(spec, 424242u);
  CHECK(a.sessions == b.sessions);
  CHECK(write_log_string(a.sessions) == write_log_string(b.sessions));
  const auto c = synth::generate(spec, 424243u);
  CHECK_FALSE(write_log_string(a.sessions) == write_log_string(c.sessions));
}

TEST_CASE("pilot-like preset matches the intended shape") {
  const auto result = synth::generate(SynthSpec::pilot_like(), 7u);
  const auto report = validate_sessions(result.sessions);
  CHECK(report.n_sessions == 23);
  CHECK(report.n_users == 7);
  CHECK(report.n_turns == 350);
  CHECK(report.rating_rate == doctest::Approx(0.80).epsilon(0.05));
  CHECK(report.turn_index_conflicts == 0);
}

TEST_CASE("constant reward tables give a closed-form analytic value") {
  SynthSpec spec = SynthSpec::estimator_bench();
  spec.n_sessions = 40;
  spec.n_users = 8;
  spec.failure_penalty = 0.0;
  for (auto& per_arch : spec.rating_mean) per_arch.fill(4.0);
  const auto result = synth::generate(spec, 11u);
  const double expected = clamped_rating_mean(4.0, spec.rating_sigma);
  for (const auto& values : result.truth.policies) {
    CHECK(values.v_user == doctest::Approx(expected).epsilon(1e-9));
  }

  // NoTool objective: pure latency penalty over the no-tool support.
  SynthSpec no_eng = spec;
  const double lat_pen = -0.2 * ((4.0 / 30.0) + (8.0 / 30.0) + (14.0 / 30.0)) / 3.0;
  for (const auto& values : result.truth.policies) {
    if (values.policy == "no_tool") {
      CHECK(values.v_obj == doctest::Approx(lat_pen).epsilon(1e-9));
    }
  }
  (void)no_eng;
}

TEST_CASE("oracle propensities are calibrated against logged actions in the large") {
  SynthSpec spec = SynthSpec::estimator_bench();
  spec.n_sessions = 1000;
  spec.n_users = 50;
  const auto result = synth::generate(spec, 3u);
  const auto data = EvalDataset::build(result.sessions, UserRewardScale::Raw);
  std::array<double, kNumTools> share{}, predicted{};
  for (size_t i = 0; i < data.n_turns(); ++i) {
    share[static_cast<size_t>(data.turns[i].action.tool)] += 1.0;
    for (int c = 0; c < kNumTools; ++c) {
      predicted[static_cast<size_t>(c)] += result.truth.oracle_props.tool[i][static_cast<size_t>(c)];
    }
  }
  for (int c = 0; c < kNumTools; ++c) {
    share[static_cast<size_t>(c)] /= static_cast<double>(data.n_turns());
    predicted[static_cast<size_t>(c)] /= static_cast<double>(data.n_turns());
    CHECK(std::abs(share[static_cast<size_t>(c)] - predicted[static_cast<size_t>(c)]) <= 0.015);
  }
}

TEST_CASE("selection bench hits the intended rating rate and oracle AUC band") {
  const auto result = synth::generate(SynthSpec::selection_bench(), 17u);
  const auto report = validate_sessions(result.sessions);
  CHECK(report.rating_rate == doctest::Approx(0.75).epsilon(0.04));
  REQUIRE(result.truth.oracle_rating_auc_defined);
  MESSAGE("selection_bench oracle rating AUC = ", result.truth.oracle_rating_auc);
  CHECK(result.truth.oracle_rating_auc >= 0.60);
  CHECK(result.truth.oracle_rating_auc <= 0.82);
}

TEST_CASE("subgroup-harm spec encodes the heterogeneity sign pattern analytically") {
  const auto result = synth::generate(SynthSpec::subgroup_harm(), 23u);
  const synth::PolicyValues* always = nullptr;
  const synth::PolicyValues* none = nullptr;
  for (const auto& v : result.truth.policies) {
    if (v.policy == "always_tool") always = &v;
    if (v.policy == "no_tool") none = &v;
  }
  REQUIRE(always != nullptr);
  REQUIRE(none != nullptr);
  // L_high archetypes benefit on the objective; L_low x E_high is harmed
  // on both objective and satisfaction.
  CHECK(always->v_obj_by_arch[0] - none->v_obj_by_arch[0] > 0.0);
  CHECK(always->v_obj_by_arch[1] - none->v_obj_by_arch[1] > 0.0);
  CHECK(always->v_obj_by_arch[3] - none->v_obj_by_arch[3] < 0.0);
  CHECK(always->v_user_by_arch[3] - none->v_user_by_arch[3] < 0.0);
  CHECK(always->v_user_by_arch[1] - none->v_user_by_arch[1] > 0.0);
}

TEST_CASE("spec JSON round trip preserves the generated log") {
  SynthSpec spec = SynthSpec::selection_bench();
  spec.n_sessions = 30;
  spec.n_users = 6;
  const SynthSpec round = SynthSpec::from_json(spec.to_json());
  const auto a = synth::generate(spec, 5u);
  const auto b = synth::generate(round, 5u);
  CHECK(a.sessions == b.sessions);
}

TEST_CASE("presets are addressable by name alone") {
  const SynthSpec spec = SynthSpec::from_json(R"({"name": "subgroup_harm"})");
  CHECK(spec.n_sessions == 1500);
  CHECK(spec.tool_success[3][1] == doctest::Approx(0.30));
  CHECK_THROWS_AS(SynthSpec::from_json("not json"), UsageError);
}

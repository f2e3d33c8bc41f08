#include <doctest.h>

#include <cmath>
#include <numeric>

#include "headope/ope.hpp"
#include "headope/rng.hpp"
#include "headope/synth.hpp"

using namespace headope;

namespace {

std::vector<ImportanceRatio> unit_ratios(size_t n) {
  std::vector<ImportanceRatio> r(n);
  for (auto& w : r) w = ImportanceRatio::from_raw(1.0, 50.0);
  return r;
}

std::vector<Session> tiny_sessions(int n_sessions, int turns, Literacy lit = Literacy::Low) {
  std::vector<Session> sessions;
  for (int s = 0; s < n_sessions; ++s) {
    Session session;
    session.session_id = "t" + std::to_string(100 + s);
    session.user = {"u" + std::to_string(100 + s), lit, Efficacy::Low};
    for (int t = 1; t <= turns; ++t) {
      LoggedTurn turn;
      turn.session_id = session.session_id;
      turn.features.turn_index = t;
      turn.action = {Tool::Code, Style::Concise};
      turn.outcome = ToolOutcome::Success;
      turn.rating = 4;
      session.turns.push_back(turn);
    }
    sessions.push_back(session);
  }
  return sessions;
}

// Minimal context with hand-set per-turn quantities.
struct HandWorld {
  EvalContext ctx;
  PolicyTurnArrays arrays;

  HandWorld(int n_sessions, int turns, Literacy lit = Literacy::Low) {
    const auto sessions = tiny_sessions(n_sessions, turns, lit);
    ctx.data = EvalDataset::build(sessions, UserRewardScale::Raw);
    const size_t n = ctx.data.n_turns();
    ctx.rated.assign(n, 1);
    ctx.p_rate.assign(n, 1.0);
    ctx.outcome = OutcomeModel::zero(n);
    arrays.ratios = unit_ratios(n);
    arrays.r_obj.assign(n, 0.0);
    arrays.r_total_snips_part.assign(n, 0.0);
    arrays.alpha.assign(n, 0.6);
    arrays.r_user.assign(n, 0.0);
    arrays.q_logged.assign(n, 0.0);
    arrays.q_pi.assign(n, 0.0);
  }

  std::vector<size_t> all_sessions() const {
    std::vector<size_t> idx(ctx.data.n_sessions());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
};

}  // namespace

TEST_CASE("snips worked values") {
  SUBCASE("unit weights reduce to the plain mean") {
    std::vector<double> r{1.0, 0.0, -1.0, 1.0};
    CHECK(snips(r, unit_ratios(4)) == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("zero-weight turns are ignored") {
    std::vector<double> r{0.5, 9.9};
    std::vector<ImportanceRatio> w{ImportanceRatio::from_raw(2.0, 50.0),
                                   ImportanceRatio::from_raw(0.0, 50.0)};
    CHECK(snips(r, w) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("all-zero weights are an estimation error, never imputed") {
    std::vector<double> r{1.0, 2.0};
    std::vector<ImportanceRatio> w{ImportanceRatio::from_raw(0.0, 50.0),
                                   ImportanceRatio::from_raw(0.0, 50.0)};
    CHECK_THROWS_AS(snips(r, w), EstimationError);
  }
}

TEST_CASE("snips properties: scale invariance and reward bounds") {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const size_t n = 3 + rng.uniform_int(40);
    std::vector<double> r(n);
    std::vector<ImportanceRatio> w(n), w3(n);
    double lo = 1e18, hi = -1e18;
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
      r[i] = rng.normal();
      const double raw = rng.uniform01() * 5.0;
      w[i] = ImportanceRatio::from_raw(raw, 1e9);
      w3[i] = ImportanceRatio::from_raw(raw * 3.0, 1e9);
      if (raw > 0.0) {
        lo = std::min(lo, r[i]);
        hi = std::max(hi, r[i]);
        any = true;
      }
    }
    if (!any) continue;
    const double v = snips(r, w);
    CHECK(snips(r, w3) == doctest::Approx(v).epsilon(1e-9));
    CHECK(v >= lo - 1e-12);
    CHECK(v <= hi + 1e-12);
  }
}

TEST_CASE("snips identity: target equal to reconstructed behavior") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 77u);
  EvalOptions opt;
  const EvalContext ctx = EvalContext::fit(result.sessions, opt);
  const BehaviorMirrorPolicy mirror(&*ctx.tool_model, &*ctx.style_model);
  const auto arrays = build_policy_arrays(ctx, mirror, opt);

  std::vector<size_t> all(ctx.data.n_sessions());
  std::iota(all.begin(), all.end(), 0);
  const double estimate = snips_over_sessions(ctx.data, arrays, all, false);
  double mean = 0.0;
  for (const EvalTurn& t : ctx.data.turns) mean += t.r_obj;
  mean /= static_cast<double>(ctx.data.n_turns());
  CHECK(std::abs(estimate - mean) <= 1e-9);
}

TEST_CASE("aipw reductions") {
  const size_t n = 6;
  std::vector<ImportanceRatio> w = unit_ratios(n);
  std::vector<double> r_user{1.0, 2.0, 0.5, -1.0, 0.0, 3.0};
  std::vector<double> q0(n, 0.0);

  SUBCASE("all turns unrated: estimate is the mean of q_pi") {
    std::vector<int> rated(n, 0);
    std::vector<double> p(n, 0.5);
    std::vector<double> q_pi{0.2, 0.4, 0.6, 0.8, 1.0, 1.2};
    CHECK(aipw_user(rated, p, w, r_user, q0, q_pi) == doctest::Approx(0.7).epsilon(1e-12));
  }
  SUBCASE("zero outcome model, full ratings, unit rating propensity: plain IPS") {
    std::vector<int> rated(n, 1);
    std::vector<double> p(n, 1.0);
    double ips = 0.0;
    for (size_t i = 0; i < n; ++i) ips += w[i].clipped * r_user[i];
    ips /= static_cast<double>(n);
    CHECK(aipw_user(rated, p, w, r_user, q0, q0) == doctest::Approx(ips).epsilon(1e-12));
  }
  SUBCASE("oracle q on a deterministic world: equals the empirical mean exactly") {
    // Deterministic rewards, point-mass behavior, target == behavior:
    // q(x, a_t) = r_t and q(x, pi) = r_t, so AIPW telescopes to mean(r).
    std::vector<int> rated(n, 1);
    std::vector<double> p(n, 1.0);
    const double mean = std::accumulate(r_user.begin(), r_user.end(), 0.0) / static_cast<double>(n);
    CHECK(aipw_user(rated, p, w, r_user, r_user, r_user) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("r_total hand composition under oracle estimators") {
  // All users low literacy (alpha .6, beta .2, gamma .2); components
  // (r_user, r_tool, r_eng) = (-1, 1, 0); unit ratios, full ratings.
  HandWorld world(2, 2, Literacy::Low);
  const size_t n = world.ctx.data.n_turns();
  world.arrays.r_user.assign(n, -1.0);
  world.arrays.r_total_snips_part.assign(n, 0.2 * 1.0 + 0.2 * 0.0);
  const double total = r_total_over_sessions(world.ctx, world.arrays, world.all_sessions());
  CHECK(total == doctest::Approx(-0.4).epsilon(1e-12));

  SUBCASE("zero weights give zero") {
    world.arrays.alpha.assign(n, 0.0);
    world.arrays.r_total_snips_part.assign(n, 0.0);
    CHECK(r_total_over_sessions(world.ctx, world.arrays, world.all_sessions()) ==
          doctest::Approx(0.0));
  }
}

TEST_CASE("bootstrap on identical sessions has zero width") {
  HandWorld world(6, 3);
  const size_t n = world.ctx.data.n_turns();
  world.arrays.r_obj.assign(n, 0.7);
  const auto est = [&](std::span<const size_t> subset) {
    return snips_over_sessions(world.ctx.data, world.arrays, subset, false);
  };
  const BootstrapResult boot = bootstrap_ci(6, est, 200, 0.95, 1u);
  CHECK(boot.low == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(boot.high == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(boot.n_failures == 0);
}

TEST_CASE("bootstrap preconditions and failure accounting") {
  const auto est = [](std::span<const size_t>) { return 0.0; };
  CHECK_THROWS_AS(bootstrap_ci(5, est, 50, 0.95, 1u), ContractError);
  CHECK_THROWS_AS(bootstrap_ci(5, est, 200, 1.5, 1u), ContractError);

  // Estimator undefined whenever the resample misses session 0; with two
  // sessions that happens on most replicates, tripping the warning.
  const auto flaky = [](std::span<const size_t> subset) {
    for (size_t s : subset) {
      if (s == 0) return 1.0;
    }
    throw EstimationError("degenerate resample");
  };
  const BootstrapResult boot = bootstrap_ci(2, flaky, 400, 0.95, 3u);
  CHECK(boot.n_failures > 80);  // ~25% of replicates miss session 0
  CHECK(boot.wide_interval_warning);
  CHECK(boot.low == 1.0);
  CHECK(boot.high == 1.0);
}

TEST_CASE("bootstrap is deterministic in the seed and indexed by replicate") {
  HandWorld world(5, 2);
  const size_t n = world.ctx.data.n_turns();
  Rng rng(8);
  for (size_t i = 0; i < n; ++i) world.arrays.r_obj[i] = rng.normal();
  const auto est = [&](std::span<const size_t> subset) {
    return snips_over_sessions(world.ctx.data, world.arrays, subset, false);
  };
  const auto a = bootstrap_ci(5, est, 300, 0.9, 42u);
  const auto b = bootstrap_ci(5, est, 300, 0.9, 42u);
  CHECK(a.low == b.low);
  CHECK(a.high == b.high);
  const auto threaded = bootstrap_ci(5, est, 300, 0.9, 42u, 4);
  CHECK(threaded.low == a.low);
  CHECK(threaded.high == a.high);
}

TEST_CASE("slice_by_archetype: identical policies give zero deltas") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 13u);
  EvalOptions opt;
  opt.scale = UserRewardScale::Raw;
  const EvalContext ctx =
      EvalContext::with_oracle(result.sessions, result.truth.oracle_props,
                               result.truth.oracle_p_rate, opt);
  const auto policy = make_policy(PolicySpec::named(PolicyKind::HeuristicGated), ctx.stats);
  const auto arrays = build_policy_arrays(ctx, *policy, opt);
  const auto deltas = slice_by_archetype(ctx, arrays, arrays);
  for (const auto& d : deltas) {
    if (!d.present) continue;
    CHECK(d.delta_objective == doctest::Approx(0.0));
    CHECK(d.delta_satisfaction == doctest::Approx(0.0));
  }
}

TEST_CASE("diagnostics worked values") {
  SUBCASE("unit weights: ESS = N, no clipping") {
    const auto ratios = unit_ratios(200);
    CHECK(effective_sample_size(ratios) == doctest::Approx(200.0));
  }
  SUBCASE("one clipped 120 among 349 unit ratios") {
    std::vector<ImportanceRatio> ratios = unit_ratios(349);
    ratios.push_back(ImportanceRatio::from_raw(120.0, 50.0));
    CHECK(ratios.back().clipped == 50.0);
    size_t hits = 0;
    for (const auto& r : ratios) hits += r.clip_hit ? 1 : 0;
    CHECK(hits == 1);
    CHECK(static_cast<double>(hits) / static_cast<double>(ratios.size()) ==
          doctest::Approx(1.0 / 350.0).epsilon(1e-12));
  }
  SUBCASE("total concentration: ESS = 1") {
    std::vector<ImportanceRatio> ratios(50, ImportanceRatio::from_raw(0.0, 50.0));
    ratios[7] = ImportanceRatio::from_raw(10.0, 50.0);
    CHECK(effective_sample_size(ratios) == doctest::Approx(1.0));
  }
}

TEST_CASE("diagnostics block on a fitted context") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 29u);
  EvalOptions opt;
  const EvalContext ctx = EvalContext::fit(result.sessions, opt);
  const auto policy = make_policy(PolicySpec::named(PolicyKind::AlwaysTool), ctx.stats);
  const auto arrays = build_policy_arrays(ctx, *policy, opt);
  const DiagnosticsBlock d = diagnostics(ctx, arrays.ratios);
  CHECK(d.n_sessions == 23);
  CHECK(d.n_turns == 350);
  CHECK(d.rating_rate > 0.6);
  CHECK(d.rating_rate < 0.95);
  CHECK(d.ess > 0.0);
  CHECK(d.ess <= 350.0 + 1e-9);
  CHECK(d.clipping_rate >= 0.0);
  CHECK(d.clipping_rate <= 1.0);
  CHECK(d.rating_auc_defined);
  CHECK(d.rating_auc > 0.5);
  CHECK(d.ece_tool >= 0.0);
  CHECK(d.ece_style >= 0.0);
}

TEST_CASE("evaluate_policy is deterministic given the seed") {
  const auto result = synth::generate(synth::SynthSpec::pilot_like(), 5u);
  EvalOptions opt;
  opt.n_boot = 150;
  opt.seed = 31337;
  const EvalContext ctx = EvalContext::fit(result.sessions, opt);
  const auto policy = make_policy(PolicySpec::named(PolicyKind::AlwaysTool), ctx.stats);
  const PolicyEstimates a = evaluate_policy(ctx, *policy, opt);
  const PolicyEstimates b = evaluate_policy(ctx, *policy, opt);
  CHECK(a.r_obj_snips == b.r_obj_snips);
  CHECK(a.r_user_aipw == b.r_user_aipw);
  CHECK(a.r_total == b.r_total);
  CHECK(a.ci_low == b.ci_low);
  CHECK(a.ci_high == b.ci_high);
  CHECK(a.ci_low <= a.r_total);
  CHECK(a.ci_high >= a.r_total);
}

TEST_CASE("per-user z-scoring flags sparse users and centers ratings") {
  auto sessions = tiny_sessions(2, 6);
  // First user: varied ratings; second user: only one rated turn.
  sessions[0].user.user_id = "varied";
  sessions[1].user.user_id = "sparse";
  for (size_t t = 0; t < sessions[0].turns.size(); ++t) {
    sessions[0].turns[t].rating = static_cast<int>(1 + (t % 5));
  }
  for (auto& t : sessions[1].turns) t.rating.reset();
  sessions[1].turns[0].rating = 5;
  const auto data = EvalDataset::build(sessions, UserRewardScale::PerUserZ);
  CHECK(data.zscore_fallbacks == 1);
  double mean = 0.0;
  for (size_t i = 0; i < 6; ++i) mean += data.turns[i].r_user;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(data.turns[6].r_user == 0.0);  // sparse user's z pinned to 0
}

#include "headope/ope.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include <Eigen/Dense>

#include "headope/parallel.hpp"
#include "headope/rng.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// EvalDataset.
// ---------------------------------------------------------------------------

EvalDataset EvalDataset::build(std::span<const Session> sessions, UserRewardScale scale) {
  EvalDataset data;

  // Per-user rating statistics for the z transform.
  struct UserStats {
    double sum = 0.0, sumsq = 0.0;
    size_t n = 0;
  };
  std::map<std::string, UserStats> stats;
  for (const Session& s : sessions) {
    for (const LoggedTurn& t : s.turns) {
      if (t.rated()) {
        auto& u = stats[s.user.user_id];
        const auto r = static_cast<double>(*t.rating);
        u.sum += r;
        u.sumsq += r * r;
        ++u.n;
      }
    }
  }
  std::map<std::string, std::pair<double, double>> user_mean_sd;
  std::map<std::string, bool> fallback_seen;
  for (const auto& [id, u] : stats) {
    if (u.n >= 2) {
      const double mean = u.sum / static_cast<double>(u.n);
      double var = u.sumsq / static_cast<double>(u.n) - mean * mean;
      var = std::max(var, 0.0);
      user_mean_sd[id] = {mean, var > 1e-12 ? std::sqrt(var) : 1.0};
    }
  }

  for (size_t si = 0; si < sessions.size(); ++si) {
    const Session& s = sessions[si];
    const size_t begin = data.turns.size();
    const auto xs = featurize_session(s);
    for (size_t ti = 0; ti < s.turns.size(); ++ti) {
      const LoggedTurn& t = s.turns[ti];
      EvalTurn e;
      e.session_index = static_cast<int>(si);
      e.archetype = s.user.archetype();
      e.literacy = s.user.literacy;
      e.x = xs[ti];
      e.action = t.action;
      e.outcome = t.outcome;
      e.rated = t.rated();
      if (e.rated) {
        const auto r = static_cast<double>(*t.rating);
        if (scale == UserRewardScale::Raw) {
          e.r_user = r;
        } else if (auto it = user_mean_sd.find(s.user.user_id); it != user_mean_sd.end()) {
          e.r_user = (r - it->second.first) / it->second.second;
        } else {
          e.r_user = 0.0;  // < 2 rated turns for this user
          if (!fallback_seen[s.user.user_id]) {
            fallback_seen[s.user.user_id] = true;
            ++data.zscore_fallbacks;
          }
        }
      }
      e.r_tool = tool_reward(t.action.tool, t.outcome);
      e.r_eng = engagement_reward(t.features, t.action.tool);
      e.r_obj = e.r_tool + e.r_eng;
      data.turns.push_back(e);
    }
    data.session_bounds.emplace_back(begin, data.turns.size());
    data.session_archetype.push_back(s.user.archetype());
  }
  return data;
}

PropensitySet PropensitySet::from_models(const HeadPropensityModel& tool_model,
                                         const HeadPropensityModel& style_model) {
  if (tool_model.propensities.size() != style_model.propensities.size()) {
    throw ContractError("propensity models disagree on turn count");
  }
  PropensitySet set;
  set.floor_eps = std::min(tool_model.floor_eps, style_model.floor_eps);
  set.tool = tool_model.propensities;
  set.style.reserve(style_model.propensities.size());
  for (const auto& p : style_model.propensities) set.style.push_back({p[0], p[1]});
  return set;
}

std::vector<HeadProbs> policy_probs_per_turn(const Policy& policy, const EvalDataset& data) {
  std::vector<HeadProbs> out;
  out.reserve(data.n_turns());
  const auto* mirror = dynamic_cast<const BehaviorMirrorPolicy*>(&policy);
  for (size_t i = 0; i < data.n_turns(); ++i) {
    out.push_back(mirror != nullptr ? mirror->probs_for_turn(i)
                                    : policy.ratio_probs(data.turns[i].x));
  }
  return out;
}

std::vector<ImportanceRatio> compute_ratios(const Policy& policy, const EvalDataset& data,
                                            const PropensitySet& props, double clip) {
  if (props.tool.size() != data.n_turns()) {
    throw ContractError("compute_ratios: propensity set does not match dataset");
  }
  const auto target = policy_probs_per_turn(policy, data);
  std::vector<ImportanceRatio> ratios;
  ratios.reserve(data.n_turns());
  for (size_t i = 0; i < data.n_turns(); ++i) {
    ratios.push_back(importance_ratio(target[i], props.tool[i], props.style[i],
                                      data.turns[i].action, clip, props.floor_eps));
  }
  return ratios;
}

// ---------------------------------------------------------------------------
// Outcome model.
// ---------------------------------------------------------------------------

namespace {

// Regressors: intercept, features (latency/chars standardized by caller-side
// stats), joint-action one-hots (reference cell 0), literacy/efficacy x
// tool-invoked interactions.
constexpr int kOutcomeDim = 1 + FeatureVector::kDim + (kNumJointActions - 1) + 2;

Eigen::VectorXd encode_outcome_row(const FeatureVector& x, int joint, double lat_center,
                                   double lat_scale, double chars_center, double chars_scale) {
  Eigen::VectorXd z(kOutcomeDim);
  int at = 0;
  z(at++) = 1.0;
  const auto vals = x.values();
  for (int d = 0; d < FeatureVector::kDim; ++d) {
    double v = vals[static_cast<size_t>(d)];
    if (d == 1) v = (v - lat_center) / lat_scale;
    if (d == 2) v = (v - chars_center) / chars_scale;
    z(at++) = v;
  }
  for (int a = 1; a < kNumJointActions; ++a) z(at++) = joint == a ? 1.0 : 0.0;
  const double tool_invoked = joint >= 2 ? 1.0 : 0.0;  // cells 0,1 are Tool::None
  z(at++) = x.literacy_high * tool_invoked;
  z(at++) = x.efficacy_high * tool_invoked;
  return z;
}

std::vector<int> session_folds_for(size_t n_sessions, int n_folds, uint64_t seed,
                                   std::string_view stream) {
  std::vector<int> perm(n_sessions);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng = Rng::substream(seed, stream);
  rng.shuffle(std::span<int>(perm));
  std::vector<int> fold(n_sessions, 0);
  for (size_t i = 0; i < n_sessions; ++i) {
    fold[static_cast<size_t>(perm[i])] = static_cast<int>(i % static_cast<size_t>(n_folds));
  }
  return fold;
}

}  // namespace

OutcomeModel OutcomeModel::zero(size_t n_turns) {
  OutcomeModel m;
  m.fitted_ = false;
  m.q_all_.assign(n_turns, {});
  m.logged_joint_.assign(n_turns, 0);
  return m;
}

double OutcomeModel::q_policy(size_t turn, const HeadProbs& probs) const {
  double v = 0.0;
  for (int a = 0; a < kNumJointActions; ++a) {
    const ActionPair pair = ActionPair::from_joint_index(a);
    v += probs.joint(pair) * q_all_.at(turn)[static_cast<size_t>(a)];
  }
  return v;
}

OutcomeModel OutcomeModel::fit(const EvalDataset& data, const Options& opt) {
  OutcomeModel model;
  const size_t n = data.n_turns();
  model.q_all_.assign(n, {});
  model.logged_joint_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    model.logged_joint_[i] = static_cast<size_t>(data.turns[i].action.joint_index());
  }

  size_t n_rated = 0;
  for (const EvalTurn& t : data.turns) n_rated += t.rated ? 1 : 0;
  if (n_rated < static_cast<size_t>(kOutcomeDim) / 2 || data.n_sessions() < 2) {
    return model;  // zero model; AIPW falls back to plain weighting
  }

  const int n_folds = std::min<int>(opt.n_folds, static_cast<int>(data.n_sessions()));
  const auto folds = session_folds_for(data.n_sessions(), n_folds, opt.seed, "outcome-folds");

  for (int f = 0; f < n_folds; ++f) {
    // Standardization stats from the training fold.
    double lat_mean = 0.0, lat_var = 0.0, ch_mean = 0.0, ch_var = 0.0;
    size_t n_train = 0;
    for (size_t i = 0; i < n; ++i) {
      const EvalTurn& t = data.turns[i];
      if (folds[static_cast<size_t>(t.session_index)] == f || !t.rated) continue;
      lat_mean += t.x.latency_seconds;
      ch_mean += t.x.response_chars;
      ++n_train;
    }
    if (n_train < static_cast<size_t>(kOutcomeDim) / 2) continue;
    lat_mean /= static_cast<double>(n_train);
    ch_mean /= static_cast<double>(n_train);
    for (size_t i = 0; i < n; ++i) {
      const EvalTurn& t = data.turns[i];
      if (folds[static_cast<size_t>(t.session_index)] == f || !t.rated) continue;
      lat_var += (t.x.latency_seconds - lat_mean) * (t.x.latency_seconds - lat_mean);
      ch_var += (t.x.response_chars - ch_mean) * (t.x.response_chars - ch_mean);
    }
    const double lat_sd = lat_var > 1e-9 ? std::sqrt(lat_var / static_cast<double>(n_train)) : 1.0;
    const double ch_sd = ch_var > 1e-9 ? std::sqrt(ch_var / static_cast<double>(n_train)) : 1.0;

    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(kOutcomeDim, kOutcomeDim);
    Eigen::VectorXd xty = Eigen::VectorXd::Zero(kOutcomeDim);
    for (size_t i = 0; i < n; ++i) {
      const EvalTurn& t = data.turns[i];
      if (folds[static_cast<size_t>(t.session_index)] == f || !t.rated) continue;
      const Eigen::VectorXd z = encode_outcome_row(t.x, static_cast<int>(model.logged_joint_[i]),
                                                   lat_mean, lat_sd, ch_mean, ch_sd);
      xtx.noalias() += z * z.transpose();
      xty.noalias() += z * t.r_user;
    }
    Eigen::MatrixXd reg = Eigen::MatrixXd::Identity(kOutcomeDim, kOutcomeDim) * opt.l2;
    reg(0, 0) = 1e-8;  // effectively unpenalized intercept
    const Eigen::VectorXd beta = (xtx + reg).ldlt().solve(xty);

    for (size_t i = 0; i < n; ++i) {
      const EvalTurn& t = data.turns[i];
      if (folds[static_cast<size_t>(t.session_index)] != f) continue;
      for (int a = 0; a < kNumJointActions; ++a) {
        const Eigen::VectorXd z = encode_outcome_row(t.x, a, lat_mean, lat_sd, ch_mean, ch_sd);
        model.q_all_[i][static_cast<size_t>(a)] = beta.dot(z);
      }
    }
  }
  model.fitted_ = true;
  return model;
}

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

double snips(std::span<const double> rewards, std::span<const ImportanceRatio> ratios) {
  if (rewards.size() != ratios.size()) throw ContractError("snips: size mismatch");
  if (rewards.empty()) throw EstimationError("snips: no turns");
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < rewards.size(); ++i) {
    num += ratios[i].clipped * rewards[i];
    den += ratios[i].clipped;
  }
  if (!(den > 0.0)) {
    throw EstimationError("snips: undefined estimate (all importance weights are zero)");
  }
  return num / den;
}

double aipw_user(std::span<const int> rated, std::span<const double> p_rate,
                 std::span<const ImportanceRatio> ratios, std::span<const double> r_user,
                 std::span<const double> q_logged, std::span<const double> q_pi,
                 std::span<const double> scale) {
  const size_t n = rated.size();
  if (p_rate.size() != n || ratios.size() != n || r_user.size() != n || q_logged.size() != n ||
      q_pi.size() != n || (!scale.empty() && scale.size() != n)) {
    throw ContractError("aipw_user: size mismatch");
  }
  if (n == 0) throw EstimationError("aipw_user: no turns");
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (!(p_rate[i] > 0.0)) throw ContractError("aipw_user: rating propensity must be positive");
    const double correction =
        rated[i] != 0 ? (ratios[i].clipped / p_rate[i]) * (r_user[i] - q_logged[i]) : 0.0;
    const double s = scale.empty() ? 1.0 : scale[i];
    sum += s * (q_pi[i] + correction);
  }
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Evaluation context.
// ---------------------------------------------------------------------------

EvalContext EvalContext::fit(std::span<const Session> sessions, const EvalOptions& opt) {
  EvalContext ctx;
  ctx.data = EvalDataset::build(sessions, opt.scale);
  ctx.stats = LogPolicyStats::from_sessions(sessions);

  PropensityFitOptions pf;
  pf.n_folds = opt.n_folds > 0 ? opt.n_folds : default_n_folds(sessions.size());
  pf.l2 = opt.propensity_l2;
  pf.floor_eps = opt.floor_eps;
  pf.seed = opt.seed;

  ctx.tool_model = fit_head_model(sessions, Head::Tool, pf);
  ctx.style_model = fit_head_model(sessions, Head::Style, pf);
  ctx.props = PropensitySet::from_models(*ctx.tool_model, *ctx.style_model);

  ctx.rating_model = fit_rating_propensity(sessions, pf);
  ctx.p_rate = ctx.rating_model->propensities;
  ctx.rated.reserve(ctx.data.n_turns());
  for (const EvalTurn& t : ctx.data.turns) ctx.rated.push_back(t.rated ? 1 : 0);

  OutcomeModel::Options oo;
  oo.n_folds = pf.n_folds;
  oo.l2 = opt.outcome_l2;
  oo.seed = opt.seed;
  ctx.outcome = OutcomeModel::fit(ctx.data, oo);
  return ctx;
}

EvalContext EvalContext::with_oracle(std::span<const Session> sessions, PropensitySet oracle_props,
                                     std::vector<double> oracle_p_rate, const EvalOptions& opt,
                                     bool fit_outcome_model, bool fit_rating_model) {
  EvalContext ctx;
  ctx.data = EvalDataset::build(sessions, opt.scale);
  ctx.stats = LogPolicyStats::from_sessions(sessions);
  if (oracle_props.tool.size() != ctx.data.n_turns()) {
    throw ContractError("oracle propensities do not match the log");
  }
  ctx.props = std::move(oracle_props);
  ctx.rated.reserve(ctx.data.n_turns());
  for (const EvalTurn& t : ctx.data.turns) ctx.rated.push_back(t.rated ? 1 : 0);

  if (fit_rating_model) {
    PropensityFitOptions pf;
    pf.n_folds = opt.n_folds > 0 ? opt.n_folds : default_n_folds(sessions.size());
    pf.l2 = opt.propensity_l2;
    pf.floor_eps = opt.floor_eps;
    pf.seed = opt.seed;
    ctx.rating_model = fit_rating_propensity(sessions, pf);
    ctx.p_rate = ctx.rating_model->propensities;
  } else if (!oracle_p_rate.empty()) {
    if (oracle_p_rate.size() != ctx.data.n_turns()) {
      throw ContractError("oracle rating propensities do not match the log");
    }
    ctx.p_rate = std::move(oracle_p_rate);
    for (double& p : ctx.p_rate) p = std::clamp(p, opt.floor_eps, 1.0);
  } else {
    ctx.p_rate.assign(ctx.data.n_turns(), 1.0);
  }

  if (fit_outcome_model) {
    OutcomeModel::Options oo;
    oo.n_folds = opt.n_folds > 0 ? opt.n_folds : default_n_folds(sessions.size());
    oo.l2 = opt.outcome_l2;
    oo.seed = opt.seed;
    ctx.outcome = OutcomeModel::fit(ctx.data, oo);
  } else {
    ctx.outcome = OutcomeModel::zero(ctx.data.n_turns());
  }
  return ctx;
}

PolicyTurnArrays build_policy_arrays(const EvalContext& ctx, const Policy& policy,
                                     const EvalOptions& opt) {
  PolicyTurnArrays arrays;
  const size_t n = ctx.data.n_turns();
  arrays.ratios = compute_ratios(policy, ctx.data, ctx.props, opt.clip);
  const auto target = policy_probs_per_turn(policy, ctx.data);

  arrays.r_obj.resize(n);
  arrays.r_total_snips_part.resize(n);
  arrays.alpha.resize(n);
  arrays.r_user.resize(n);
  arrays.q_logged.resize(n);
  arrays.q_pi.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const EvalTurn& t = ctx.data.turns[i];
    const WeightTriple w = WeightTriple::for_literacy(t.literacy);
    arrays.r_obj[i] = t.r_obj;
    arrays.r_total_snips_part[i] = w.beta * t.r_tool + w.gamma * t.r_eng;
    arrays.alpha[i] = w.alpha;
    arrays.r_user[i] = t.r_user;
    arrays.q_logged[i] = ctx.outcome.q_logged(i);
    arrays.q_pi[i] = ctx.outcome.q_policy(i, target[i]);
  }
  return arrays;
}

namespace {

// Gathers per-turn values for a session subset into scratch buffers.
struct SubsetView {
  std::vector<ImportanceRatio> ratios;
  std::vector<double> a, b, c, d;
  std::vector<int> flags;

  void clear() {
    ratios.clear();
    a.clear();
    b.clear();
    c.clear();
    d.clear();
    flags.clear();
  }
};

}  // namespace

double snips_over_sessions(const EvalDataset& data, const PolicyTurnArrays& arrays,
                           std::span<const size_t> sessions, bool total_part) {
  double num = 0.0, den = 0.0;
  bool any = false;
  for (size_t s : sessions) {
    const auto [begin, end] = data.session_bounds.at(s);
    for (size_t i = begin; i < end; ++i) {
      const double w = arrays.ratios[i].clipped;
      const double r = total_part ? arrays.r_total_snips_part[i] : arrays.r_obj[i];
      num += w * r;
      den += w;
      any = true;
    }
  }
  if (!any) throw EstimationError("snips: no turns in subset");
  if (!(den > 0.0)) {
    throw EstimationError("snips: undefined estimate (all importance weights are zero)");
  }
  return num / den;
}

double aipw_over_sessions(const EvalContext& ctx, const PolicyTurnArrays& arrays,
                          std::span<const size_t> sessions, bool alpha_scaled) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t s : sessions) {
    const auto [begin, end] = ctx.data.session_bounds.at(s);
    for (size_t i = begin; i < end; ++i) {
      const double correction =
          ctx.rated[i] != 0
              ? (arrays.ratios[i].clipped / ctx.p_rate[i]) * (arrays.r_user[i] - arrays.q_logged[i])
              : 0.0;
      const double scale = alpha_scaled ? arrays.alpha[i] : 1.0;
      sum += scale * (arrays.q_pi[i] + correction);
      ++count;
    }
  }
  if (count == 0) throw EstimationError("aipw: no turns in subset");
  return sum / static_cast<double>(count);
}

double r_total_over_sessions(const EvalContext& ctx, const PolicyTurnArrays& arrays,
                             std::span<const size_t> sessions) {
  return snips_over_sessions(ctx.data, arrays, sessions, /*total_part=*/true) +
         aipw_over_sessions(ctx, arrays, sessions, /*alpha_scaled=*/true);
}

BootstrapResult bootstrap_ci(size_t n_sessions,
                             const std::function<double(std::span<const size_t>)>& estimator,
                             int n_boot, double level, uint64_t seed, int threads) {
  if (n_boot < 100) throw ContractError("bootstrap_ci: n_boot must be >= 100");
  if (!(level > 0.0 && level < 1.0)) throw ContractError("bootstrap_ci: level must be in (0,1)");
  if (n_sessions == 0) throw EstimationError("bootstrap_ci: no sessions");

  std::vector<double> estimates(static_cast<size_t>(n_boot));
  std::vector<uint8_t> ok(static_cast<size_t>(n_boot), 0);
  parallel_for(static_cast<size_t>(n_boot), threads, [&](size_t b) {
    Rng rng = Rng::substream(seed, "bootstrap", b);
    std::vector<size_t> sample(n_sessions);
    for (size_t i = 0; i < n_sessions; ++i) sample[i] = rng.uniform_int(n_sessions);
    try {
      estimates[b] = estimator(sample);
      ok[b] = 1;
    } catch (const EstimationError&) {
      ok[b] = 0;
    }
  });

  std::vector<double> kept;
  kept.reserve(estimates.size());
  for (size_t b = 0; b < estimates.size(); ++b) {
    if (ok[b] != 0) kept.push_back(estimates[b]);
  }
  BootstrapResult result;
  result.n_failures = estimates.size() - kept.size();
  result.wide_interval_warning =
      result.n_failures * 5 > estimates.size();  // > 20% of replicates failed
  if (kept.empty()) {
    throw EstimationError("bootstrap_ci: estimator undefined on every replicate");
  }
  std::sort(kept.begin(), kept.end());
  auto quantile = [&](double p) {
    const double h = p * static_cast<double>(kept.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, kept.size() - 1);
    const double frac = h - std::floor(h);
    return kept[lo] * (1.0 - frac) + kept[hi] * frac;
  };
  const double tail = (1.0 - level) / 2.0;
  result.low = quantile(tail);
  result.high = quantile(1.0 - tail);
  return result;
}

PolicyEstimates evaluate_policy(const EvalContext& ctx, const Policy& policy,
                                const EvalOptions& opt, bool with_bootstrap) {
  const PolicyTurnArrays arrays = build_policy_arrays(ctx, policy, opt);

  std::vector<size_t> all(ctx.data.n_sessions());
  std::iota(all.begin(), all.end(), 0);

  PolicyEstimates est;
  est.policy = policy.name();
  est.r_obj_snips = snips_over_sessions(ctx.data, arrays, all, /*total_part=*/false);
  est.r_user_aipw = aipw_over_sessions(ctx, arrays, all, /*alpha_scaled=*/false);
  est.r_total = r_total_over_sessions(ctx, arrays, all);

  if (with_bootstrap) {
    const BootstrapResult boot = bootstrap_ci(
        ctx.data.n_sessions(),
        [&](std::span<const size_t> subset) { return r_total_over_sessions(ctx, arrays, subset); },
        opt.n_boot, opt.ci_level, opt.seed, opt.threads);
    est.ci_low = boot.low;
    est.ci_high = boot.high;
    est.ci_valid = true;
    est.boot_failures = boot.n_failures;
    est.boot_warning = boot.wide_interval_warning;
  }
  return est;
}

std::array<ArchetypeDelta, kNumArchetypes> slice_by_archetype(const EvalContext& ctx,
                                                              const PolicyTurnArrays& policy_a,
                                                              const PolicyTurnArrays& policy_b) {
  std::array<ArchetypeDelta, kNumArchetypes> deltas;
  for (int arch = 0; arch < kNumArchetypes; ++arch) {
    ArchetypeDelta& d = deltas[static_cast<size_t>(arch)];
    d.archetype = arch;
    std::vector<size_t> subset;
    for (size_t s = 0; s < ctx.data.n_sessions(); ++s) {
      if (ctx.data.session_archetype[s] == arch) subset.push_back(s);
    }
    if (subset.empty()) continue;  // reported as absent
    d.present = true;
    d.n_sessions = subset.size();
    for (size_t s : subset) {
      const auto [begin, end] = ctx.data.session_bounds[s];
      d.n_turns += end - begin;
    }
    try {
      const double obj_a = snips_over_sessions(ctx.data, policy_a, subset, false);
      const double obj_b = snips_over_sessions(ctx.data, policy_b, subset, false);
      d.delta_objective = obj_a - obj_b;
    } catch (const EstimationError&) {
      d.present = true;  // satisfaction may still be defined; objective stays 0
    }
    const double sat_a = aipw_over_sessions(ctx, policy_a, subset, false);
    const double sat_b = aipw_over_sessions(ctx, policy_b, subset, false);
    d.delta_satisfaction = sat_a - sat_b;
  }
  return deltas;
}

double effective_sample_size(std::span<const ImportanceRatio> ratios) {
  double sum = 0.0, sumsq = 0.0;
  for (const ImportanceRatio& r : ratios) {
    sum += r.clipped;
    sumsq += r.clipped * r.clipped;
  }
  if (!(sumsq > 0.0)) return 0.0;
  return sum * sum / sumsq;
}

DiagnosticsBlock diagnostics(const EvalContext& ctx, std::span<const ImportanceRatio> ratios) {
  DiagnosticsBlock d;
  d.n_sessions = ctx.data.n_sessions();
  d.n_turns = ctx.data.n_turns();
  if (ratios.size() != d.n_turns) throw ContractError("diagnostics: ratio count mismatch");

  size_t rated = 0, clipped = 0;
  for (size_t i = 0; i < d.n_turns; ++i) {
    rated += ctx.rated[i] != 0 ? 1 : 0;
    clipped += ratios[i].clip_hit ? 1 : 0;
  }
  d.rating_rate = d.n_turns > 0 ? static_cast<double>(rated) / static_cast<double>(d.n_turns) : 0.0;
  d.clipping_rate =
      d.n_turns > 0 ? static_cast<double>(clipped) / static_cast<double>(d.n_turns) : 0.0;
  d.ess = effective_sample_size(ratios);

  // Max-prob calibration of the behavior propensities against logged actions.
  auto head_ece = [&](bool tool_head) {
    std::vector<double> conf(d.n_turns);
    std::vector<int> correct(d.n_turns);
    for (size_t i = 0; i < d.n_turns; ++i) {
      if (tool_head) {
        const auto& p = ctx.props.tool[i];
        const auto arg = static_cast<size_t>(std::max_element(p.begin(), p.end()) - p.begin());
        conf[i] = p[arg];
        correct[i] = static_cast<size_t>(ctx.data.turns[i].action.tool) == arg ? 1 : 0;
      } else {
        const auto& p = ctx.props.style[i];
        const size_t arg = p[1] > p[0] ? 1 : 0;
        conf[i] = p[arg];
        correct[i] = static_cast<size_t>(ctx.data.turns[i].action.style) == arg ? 1 : 0;
      }
    }
    return ece(conf, correct, 10);
  };
  if (d.n_turns > 0) {
    d.ece_tool = head_ece(true);
    d.ece_style = head_ece(false);
  }

  if (rated > 0 && rated < d.n_turns) {
    d.rating_auc = auc(ctx.p_rate, ctx.rated);
    d.rating_auc_defined = true;
  }
  for (size_t i = 0; i < d.n_turns; ++i) {
    if (ctx.rated[i] != 0 && ctx.p_rate[i] <= ctx.props.floor_eps * (1.0 + 1e-9)) {
      ++d.p_rate_floor_hits;
    }
  }

  if (ctx.tool_model) {
    d.floor_hits_tool = ctx.tool_model->floor_hits;
    d.tool_degenerate = ctx.tool_model->degenerate;
  }
  if (ctx.style_model) {
    d.floor_hits_style = ctx.style_model->floor_hits;
    d.style_degenerate = ctx.style_model->degenerate;
  }
  if (ctx.rating_model) d.no_selection = ctx.rating_model->no_selection;
  return d;
}

}  // namespace headope

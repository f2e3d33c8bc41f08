#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "headope/behavior.hpp"
#include "headope/model.hpp"
#include "headope/policies.hpp"
#include "headope/rewards.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// Flattened evaluation dataset.
// ---------------------------------------------------------------------------

enum class UserRewardScale {
  PerUserZ,  // z-score ratings per user over that user's rated turns
  Raw,       // rating as-is (synthetic-oracle comparisons)
};

struct EvalTurn {
  int session_index = 0;
  int archetype = 0;
  Literacy literacy = Literacy::Low;
  FeatureVector x;
  ActionPair action;
  ToolOutcome outcome = ToolOutcome::NotInvoked;
  bool rated = false;
  double r_user = 0.0;  // transformed rating; 0 and masked when unrated
  double r_tool = 0.0;
  double r_eng = 0.0;
  double r_obj = 0.0;   // r_tool + r_eng
};

struct EvalDataset {
  std::vector<EvalTurn> turns;
  std::vector<std::pair<size_t, size_t>> session_bounds;  // [begin, end) per session
  std::vector<int> session_archetype;
  size_t zscore_fallbacks = 0;  // users with < 2 rated turns (z fixed to 0)

  size_t n_sessions() const { return session_bounds.size(); }
  size_t n_turns() const { return turns.size(); }

  static EvalDataset build(std::span<const Session> sessions,
                           UserRewardScale scale = UserRewardScale::PerUserZ);
};

// Per-turn behavior propensities, fitted or oracle.
struct PropensitySet {
  std::vector<std::array<double, kNumTools>> tool;
  std::vector<std::array<double, kNumStyles>> style;
  double floor_eps = 0.01;

  static PropensitySet from_models(const HeadPropensityModel& tool_model,
                                   const HeadPropensityModel& style_model);
};

// Clipped importance ratios of a target policy against the behavior
// propensities, one per turn.
std::vector<ImportanceRatio> compute_ratios(const Policy& policy, const EvalDataset& data,
                                            const PropensitySet& props, double clip);

// Target-policy head probabilities per turn (ratio-smoothed form).
std::vector<HeadProbs> policy_probs_per_turn(const Policy& policy, const EvalDataset& data);

// ---------------------------------------------------------------------------
// Outcome model q_user(x, a): cross-fitted ridge regression on rated turns.
// ---------------------------------------------------------------------------

class OutcomeModel {
 public:
  struct Options {
    int n_folds = 5;
    double l2 = 1.0;
    uint64_t seed = 0;
  };

  // Fits on the dataset's rated turns at session level; a zero model (with
  // fitted_ok() false) results when there is nothing to fit on.
  static OutcomeModel fit(const EvalDataset& data, const Options& options);

  // Zero model: q == 0 everywhere (plain-IPS reduction of AIPW).
  static OutcomeModel zero(size_t n_turns);

  bool fitted_ok() const { return fitted_; }
  double q_logged(size_t turn) const { return q_all_.at(turn)[logged_joint_.at(turn)]; }
  double q_at(size_t turn, int joint_action) const {
    return q_all_.at(turn)[static_cast<size_t>(joint_action)];
  }
  // sum_a pi(a|x_t) q(x_t, a) for factorized head probabilities.
  double q_policy(size_t turn, const HeadProbs& probs) const;

 private:
  bool fitted_ = false;
  std::vector<std::array<double, kNumJointActions>> q_all_;
  std::vector<size_t> logged_joint_;
};

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

// Self-normalized IPS: sum(w*r) / sum(w). Throws EstimationError when the
// weight mass is zero (undefined estimate, never imputed).
double snips(std::span<const double> rewards, std::span<const ImportanceRatio> ratios);

// AIPW satisfaction estimator:
//   (1/T) sum_t scale_t * [ q_pi_t + (rated_t / p_rate_t) * w_t * (r_user_t - q_logged_t) ]
// scale carries optional per-turn alpha weights (pass {} for 1s).
double aipw_user(std::span<const int> rated, std::span<const double> p_rate,
                 std::span<const ImportanceRatio> ratios, std::span<const double> r_user,
                 std::span<const double> q_logged, std::span<const double> q_pi,
                 std::span<const double> scale = {});

// ---------------------------------------------------------------------------
// Per-policy evaluation bundle.
// ---------------------------------------------------------------------------

struct EvalOptions {
  double clip = kDefaultClip;
  int n_boot = 1000;
  double ci_level = 0.95;
  int n_folds = 0;  // 0: auto (5, or 3 when sessions < 10)
  double floor_eps = 0.01;
  double propensity_l2 = 1.0;
  double outcome_l2 = 1.0;
  UserRewardScale scale = UserRewardScale::PerUserZ;
  uint64_t seed = 0;
  int threads = 1;
};

// Everything fitted once per log and shared across target policies.
struct EvalContext {
  EvalDataset data;
  PropensitySet props;
  std::vector<double> p_rate;  // floored rating propensities per turn
  std::vector<int> rated;
  OutcomeModel outcome;
  LogPolicyStats stats;

  // Present on the fitted path, absent on the oracle path.
  std::optional<HeadPropensityModel> tool_model;
  std::optional<HeadPropensityModel> style_model;
  std::optional<RatingPropensityModel> rating_model;

  static EvalContext fit(std::span<const Session> sessions, const EvalOptions& options);

  // Oracle path for synthetic logs with known propensities. Used by tests
  // only; there is no CLI ingestion route for logged propensities.
  static EvalContext with_oracle(std::span<const Session> sessions, PropensitySet oracle_props,
                                 std::vector<double> oracle_p_rate, const EvalOptions& options,
                                 bool fit_outcome_model = true,
                                 bool fit_rating_model = false);
};

// Per-turn quantities for one target policy, precomputed so bootstrap
// replicates never refit models.
struct PolicyTurnArrays {
  std::vector<ImportanceRatio> ratios;
  std::vector<double> r_obj;
  std::vector<double> r_total_snips_part;  // beta_w*r_tool + gamma_w*r_eng
  std::vector<double> alpha;               // alpha_w per turn (literacy preset)
  std::vector<double> r_user;
  std::vector<double> q_logged;
  std::vector<double> q_pi;
};

PolicyTurnArrays build_policy_arrays(const EvalContext& ctx, const Policy& policy,
                                     const EvalOptions& options);

struct BootstrapResult {
  double low = 0.0;
  double high = 0.0;
  size_t n_failures = 0;
  bool wide_interval_warning = false;  // estimator undefined on > 20% of replicates
};

// Percentile interval over session-level resamples. The estimator is
// called with a multiset of session indices; EstimationError marks the
// replicate failed. Requires n_boot >= 100.
BootstrapResult bootstrap_ci(size_t n_sessions,
                             const std::function<double(std::span<const size_t>)>& estimator,
                             int n_boot, double level, uint64_t seed, int threads = 1);

// Estimates over a session subset (indices may repeat under resampling).
double snips_over_sessions(const EvalDataset& data, const PolicyTurnArrays& arrays,
                           std::span<const size_t> sessions, bool total_part);
double aipw_over_sessions(const EvalContext& ctx, const PolicyTurnArrays& arrays,
                          std::span<const size_t> sessions, bool alpha_scaled);
double r_total_over_sessions(const EvalContext& ctx, const PolicyTurnArrays& arrays,
                             std::span<const size_t> sessions);

struct PolicyEstimates {
  std::string policy;
  double r_obj_snips = 0.0;
  double r_user_aipw = 0.0;
  double r_total = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool ci_valid = false;
  size_t boot_failures = 0;
  bool boot_warning = false;
};

// Point estimates plus a session-bootstrap CI on r_total.
PolicyEstimates evaluate_policy(const EvalContext& ctx, const Policy& policy,
                                const EvalOptions& options, bool with_bootstrap = true);

// ---------------------------------------------------------------------------
// Archetype slicing and diagnostics.
// ---------------------------------------------------------------------------

struct ArchetypeDelta {
  int archetype = 0;
  bool present = false;  // archetype has >= 1 session
  double delta_objective = 0.0;     // SNIPS objective difference (a - b)
  double delta_satisfaction = 0.0;  // AIPW satisfaction difference (a - b)
  size_t n_sessions = 0;
  size_t n_turns = 0;
};

std::array<ArchetypeDelta, kNumArchetypes> slice_by_archetype(const EvalContext& ctx,
                                                              const PolicyTurnArrays& policy_a,
                                                              const PolicyTurnArrays& policy_b);

struct DiagnosticsBlock {
  size_t n_sessions = 0;
  size_t n_turns = 0;
  double rating_rate = 0.0;
  double clipping_rate = 0.0;  // fraction of turns with clip_hit
  double ess = 0.0;            // (sum w)^2 / sum w^2
  double ece_tool = 0.0;       // max-prob ECE of behavior propensities
  double ece_style = 0.0;
  double rating_auc = 0.5;
  bool rating_auc_defined = false;
  size_t floor_hits_tool = 0;
  size_t floor_hits_style = 0;
  bool tool_degenerate = false;
  bool style_degenerate = false;
  bool no_selection = false;
  size_t p_rate_floor_hits = 0;
};

DiagnosticsBlock diagnostics(const EvalContext& ctx, std::span<const ImportanceRatio> ratios);

// Effective sample size of a weight vector: (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const ImportanceRatio> ratios);

}  // namespace headope

#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "headope/behavior.hpp"
#include "headope/model.hpp"

namespace headope {

// ---------------------------------------------------------------------------
// Target policies over the (Tool, Style) heads.
// ---------------------------------------------------------------------------

struct HeadProbs {
  std::array<double, kNumTools> tool{};
  std::array<double, kNumStyles> style{};

  double joint(const ActionPair& a) const {
    return tool[static_cast<size_t>(a.tool)] * style[static_cast<size_t>(a.style)];
  }
};

enum class PolicyKind { NoTool, AlwaysTool, HeuristicGated, PersonalizedWeights, Custom };

PolicyKind policy_kind_from_string(const std::string& name);
std::string to_string(PolicyKind k);

// Declarative policy description; make_policy turns it into an evaluator.
struct PolicySpec {
  PolicyKind kind = PolicyKind::NoTool;

  // Rule parameters shared by the gated policies.
  int gate_turn_limit = 10;         // invoke tools only in the first N turns
  double literacy_gate_shift = 0.2; // PersonalizedWeights: +/- on the gate probability

  // Smoothing applied to deterministic head choices before ratio
  // computation (uniform mixing). The NoTool tool head and the
  // AlwaysTool None-cell are exempt: their zeros are the counterfactual.
  double smooth_eps = 0.01;

  // Custom policies: declarative per-head probability tables (JSON text,
  // see CustomTablePolicy for the schema).
  std::string custom_config_json;

  static PolicySpec named(PolicyKind kind) { return PolicySpec{.kind = kind}; }
};

// Log statistics some policies need (AlwaysTool's tool-type conditional).
struct LogPolicyStats {
  // Conditional distribution over {Search, Code, Email} among tool-invoking
  // logged turns; uniform with a warning flag when the log has none.
  std::array<double, kNumTools> tool_conditional{0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3};
  bool conditional_degenerate = false;

  static LogPolicyStats from_sessions(std::span<const Session> sessions);
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual const std::string& name() const = 0;

  // Exact per-head distributions at a context.
  virtual HeadProbs probs(const FeatureVector& x) const = 0;

  // Distributions used for importance ratios: deterministic head choices
  // are smoothed into the open simplex, except cells whose zero is the
  // intended counterfactual (NoTool's tool head, AlwaysTool's None cell).
  virtual HeadProbs ratio_probs(const FeatureVector& x) const = 0;
};

std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const LogPolicyStats& stats);

// Target policy that mirrors a reconstructed behavior model exactly;
// every importance ratio is identically 1. Used by diagnostics and the
// on-policy identity checks, not reachable from the CLI policy names.
class BehaviorMirrorPolicy final : public Policy {
 public:
  BehaviorMirrorPolicy(const HeadPropensityModel* tool_model, const HeadPropensityModel* style_model);
  const std::string& name() const override { return name_; }
  HeadProbs probs(const FeatureVector& x) const override;
  HeadProbs ratio_probs(const FeatureVector& x) const override;

  // Mirror policies are defined per logged turn, not per feature vector.
  HeadProbs probs_for_turn(size_t turn_index) const;

 private:
  std::string name_ = "behavior_mirror";
  const HeadPropensityModel* tool_model_;
  const HeadPropensityModel* style_model_;
};

// ---------------------------------------------------------------------------
// Importance ratios.
// ---------------------------------------------------------------------------

struct ImportanceRatio {
  double raw = 1.0;      // product over heads of target/behavior propensities
  double clipped = 1.0;  // min(raw, c)
  bool clip_hit = false;

  static ImportanceRatio from_raw(double raw, double c);
};

inline constexpr double kDefaultClip = 50.0;

// w = prod_h pi^h(a^h|x) / pi_b^h(a^h|x), clipped at c. Behavior
// propensities below the model floor violate the contract.
ImportanceRatio importance_ratio(const HeadProbs& target,
                                 const std::array<double, kNumTools>& behavior_tool,
                                 const std::array<double, kNumStyles>& behavior_style,
                                 const ActionPair& logged_action, double c, double floor_eps);

}  // namespace headope
